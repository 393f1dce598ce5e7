#include "pegrl/policy.hpp"

#include "pegrl/arm.hpp"
#include "pegrl/math.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace pegrl {

Eigen::MatrixXd orthogonal_init(int rows, int cols, double gain, Rng& rng) {
    const bool tall = rows >= cols;
    const int r = tall ? rows : cols;
    const int c = tall ? cols : rows;
    Eigen::MatrixXd g(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
    const Eigen::MatrixXd rmat = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
    for (int j = 0; j < c; ++j)
        if (rmat(j, j) < 0.0) q.col(j) = -q.col(j);
    q *= gain;
    return tall ? q : Eigen::MatrixXd(q.transpose());
}

PolicyNet::PolicyNet(const PolicyConfig& cfg, Rng& init_rng) : cfg_(cfg) {
    const int in = cfg.input_dim();
    const int h = cfg.hidden;
    const int d = cfg.action_dim;
    const double gain = std::sqrt(2.0);
    w1 = orthogonal_init(in, h, gain, init_rng);
    b1 = Eigen::VectorXd::Zero(h);
    w2 = orthogonal_init(h, h, gain, init_rng);
    b2 = Eigen::VectorXd::Zero(h);
    wa = Eigen::MatrixXd::Zero(h, d);
    ba = Eigen::VectorXd::Zero(d);
    wc = orthogonal_init(h, 1, gain, init_rng);
    bc = 0.0;
    log_std_ = Eigen::VectorXd::Constant(d, cfg.log_std_init);
}

void PolicyNet::forward(const Eigen::VectorXd& x, Eigen::VectorXd& mean, double& value) const {
    if (!x.allFinite()) throw PlantError("policy: non-finite input");
    const Eigen::VectorXd h1 = (w1.transpose() * x + b1).array().tanh();
    const Eigen::VectorXd h2 = (w2.transpose() * h1 + b2).array().tanh();
    mean = wa.transpose() * h2 + ba;
    value = (wc.transpose() * h2)(0) + bc;
}

Eigen::VectorXd PolicyNet::mean_only(const Eigen::VectorXd& x) const {
    Eigen::VectorXd mean;
    double value;
    forward(x, mean, value);
    return mean;
}

void PolicyNet::forward_batch(const Eigen::MatrixXd& x, Cache& cache) const {
    cache.x = x;
    cache.h1 = ((x * w1).rowwise() + b1.transpose()).array().tanh();
    cache.h2 = ((cache.h1 * w2).rowwise() + b2.transpose()).array().tanh();
    cache.mean = (cache.h2 * wa).rowwise() + ba.transpose();
    cache.value = (cache.h2 * wc).col(0).array() + bc;
}

void PolicyNet::Grads::setZero(const PolicyConfig& cfg) {
    const int in = cfg.input_dim();
    const int h = cfg.hidden;
    const int d = cfg.action_dim;
    w1 = Eigen::MatrixXd::Zero(in, h);
    b1 = Eigen::VectorXd::Zero(h);
    w2 = Eigen::MatrixXd::Zero(h, h);
    b2 = Eigen::VectorXd::Zero(h);
    wa = Eigen::MatrixXd::Zero(h, d);
    ba = Eigen::VectorXd::Zero(d);
    wc = Eigen::MatrixXd::Zero(h, 1);
    bc = 0.0;
    log_std = Eigen::VectorXd::Zero(d);
}

double PolicyNet::Grads::squared_norm() const {
    return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm() +
           wa.squaredNorm() + ba.squaredNorm() + wc.squaredNorm() + bc * bc +
           log_std.squaredNorm();
}

void PolicyNet::Grads::scale(double s) {
    w1 *= s;
    b1 *= s;
    w2 *= s;
    b2 *= s;
    wa *= s;
    ba *= s;
    wc *= s;
    bc *= s;
    log_std *= s;
}

void PolicyNet::backward(const Cache& cache, const Eigen::MatrixXd& dmean,
                         const Eigen::VectorXd& dvalue, const Eigen::VectorXd& dlog_std,
                         Grads& grads) const {
    grads.wa = cache.h2.transpose() * dmean;
    grads.ba = dmean.colwise().sum();
    grads.wc = cache.h2.transpose() * dvalue;
    grads.bc = dvalue.sum();
    grads.log_std = dlog_std;

    Eigen::MatrixXd dh2 = dmean * wa.transpose();
    dh2.noalias() += dvalue * wc.transpose();
    dh2.array() *= (1.0 - cache.h2.array().square());

    grads.w2 = cache.h1.transpose() * dh2;
    grads.b2 = dh2.colwise().sum();

    Eigen::MatrixXd dh1 = dh2 * w2.transpose();
    dh1.array() *= (1.0 - cache.h1.array().square());

    grads.w1 = cache.x.transpose() * dh1;
    grads.b1 = dh1.colwise().sum();
}

namespace {
void append(Eigen::VectorXd& out, Eigen::Index& at, const Eigen::MatrixXd& m) {
    out.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    at += m.size();
}
void take(const Eigen::VectorXd& in, Eigen::Index& at, Eigen::MatrixXd& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = in.segment(at, m.size());
    at += m.size();
}
void take(const Eigen::VectorXd& in, Eigen::Index& at, Eigen::VectorXd& v) {
    v = in.segment(at, v.size());
    at += v.size();
}
}  // namespace

Eigen::VectorXd PolicyNet::flatten() const {
    const Eigen::Index total = w1.size() + b1.size() + w2.size() + b2.size() + wa.size() +
                               ba.size() + wc.size() + 1 + log_std_.size();
    Eigen::VectorXd flat(total);
    Eigen::Index at = 0;
    append(flat, at, w1);
    append(flat, at, b1);
    append(flat, at, w2);
    append(flat, at, b2);
    append(flat, at, wa);
    append(flat, at, ba);
    append(flat, at, wc);
    flat[at++] = bc;
    append(flat, at, log_std_);
    return flat;
}

void PolicyNet::set_from_flat(const Eigen::VectorXd& flat) {
    Eigen::Index at = 0;
    take(flat, at, w1);
    take(flat, at, b1);
    take(flat, at, w2);
    take(flat, at, b2);
    take(flat, at, wa);
    take(flat, at, ba);
    take(flat, at, wc);
    bc = flat[at++];
    take(flat, at, log_std_);
}

Eigen::VectorXd PolicyNet::actor_head_flat() const {
    Eigen::VectorXd flat(wa.size() + ba.size() + log_std_.size());
    Eigen::Index at = 0;
    append(flat, at, wa);
    append(flat, at, ba);
    append(flat, at, log_std_);
    return flat;
}

void PolicyNet::save(const std::string& dir, std::uint64_t seed, long episode_count) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const Eigen::VectorXd flat = flatten();
    std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
    bin.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
    std::ofstream man(fs::path(dir) / "manifest.txt");
    man << "format = pegrl-checkpoint-v1\n";
    man << "obs_dim = " << cfg_.obs_dim << "\n";
    man << "window = " << cfg_.window << "\n";
    man << "hidden = " << cfg_.hidden << "\n";
    man << "action_dim = " << cfg_.action_dim << "\n";
    man << "layers = w1 b1 w2 b2 wa ba wc bc log_std\n";
    man << "param_count = " << flat.size() << "\n";
    man << "seed = " << seed << "\n";
    man << "episode_count = " << episode_count << "\n";
}

PolicyNet PolicyNet::load(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream man(fs::path(dir) / "manifest.txt");
    if (!man) throw ConfigError("checkpoint: missing manifest at " + dir);
    PolicyConfig cfg;
    std::string line;
    long param_count = -1;
    while (std::getline(man, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq - 1);
        const std::string value = line.substr(eq + 2);
        if (key == "obs_dim") cfg.obs_dim = std::stoi(value);
        if (key == "window") cfg.window = std::stoi(value);
        if (key == "hidden") cfg.hidden = std::stoi(value);
        if (key == "action_dim") cfg.action_dim = std::stoi(value);
        if (key == "param_count") param_count = std::stol(value);
    }
    Rng dummy(0);
    PolicyNet net(cfg, dummy);
    Eigen::VectorXd flat = net.flatten();
    if (param_count != flat.size()) throw ConfigError("checkpoint: parameter count mismatch");
    std::ifstream bin(fs::path(dir) / "params.bin", std::ios::binary);
    if (!bin) throw ConfigError("checkpoint: missing params.bin at " + dir);
    bin.read(reinterpret_cast<char*>(flat.data()),
             static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!bin) throw ConfigError("checkpoint: truncated params.bin");
    net.set_from_flat(flat);
    return net;
}

GaussianSample sample_action(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                             Rng& rng) {
    GaussianSample s;
    s.action.resize(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i)
        s.action[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
    s.log_prob = gaussian_log_prob(s.action, mean, log_std);
    return s;
}

double gaussian_log_prob(const Eigen::VectorXd& action, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std) {
    const Eigen::ArrayXd z = (action - mean).array() / log_std.array().exp();
    return -0.5 * z.square().sum() - log_std.sum() -
           0.5 * static_cast<double>(action.size()) * std::log(2.0 * kPi);
}

}  // namespace pegrl
