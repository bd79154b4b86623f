#include "shapeservo/rbf.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "shapeservo/rng.hpp"

namespace shapeservo {

Eigen::VectorXd rbf_activation(const RbfNetwork& net, const Eigen::VectorXd& q) {
    const int k = static_cast<int>(net.widths.size());
    Eigen::VectorXd theta(k);
    for (int j = 0; j < k; ++j) {
        const double d2 = (q - net.centers.col(j)).squaredNorm();
        const double s = net.widths(j);
        theta(j) = std::exp(-d2 / (s * s));
    }
    return theta;
}

Eigen::MatrixXd estimate_jacobian(const RbfBank& bank, const Eigen::VectorXd& q) {
    Eigen::MatrixXd J(bank.dims.m, bank.dims.n);
    for (int i = 0; i < bank.dims.m; ++i) {
        const auto& net = bank.nets[static_cast<std::size_t>(i)];
        J.row(i) = (net.weights * rbf_activation(net, q)).transpose();
    }
    return J;
}

Eigen::MatrixXd build_parameterization(const RbfBank& bank, const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& qdot) {
    const auto [m, n, k] = bank.dims;
    if (q.size() != n || qdot.size() != n) {
        throw DimensionMismatch("q/qdot size does not match bank dims");
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, bank.dims.weight_count());
    for (int i = 0; i < m; ++i) {
        const Eigen::VectorXd theta =
            rbf_activation(bank.nets[static_cast<std::size_t>(i)], q);
        for (int j = 0; j < k; ++j) {
            M.block(i, (i * k + j) * n, 1, n) = theta(j) * qdot.transpose();
        }
    }
    return M;
}

Eigen::VectorXd vectorize_weights(const RbfBank& bank) {
    const auto [m, n, k] = bank.dims;
    Eigen::VectorXd w(bank.dims.weight_count());
    for (int i = 0; i < m; ++i) {
        const auto& W = bank.nets[static_cast<std::size_t>(i)].weights;
        for (int j = 0; j < k; ++j) {
            w.segment((i * k + j) * n, n) = W.col(j);
        }
    }
    return w;
}

void set_weights_from_vector(RbfBank& bank, const Eigen::VectorXd& w) {
    const auto [m, n, k] = bank.dims;
    if (w.size() != bank.dims.weight_count()) {
        throw DimensionMismatch("weight vector size does not match bank dims");
    }
    for (int i = 0; i < m; ++i) {
        auto& W = bank.nets[static_cast<std::size_t>(i)].weights;
        for (int j = 0; j < k; ++j) {
            W.col(j) = w.segment((i * k + j) * n, n);
        }
    }
}

namespace {

// Basis layouts covering [q_min, q_max]; see init_bank docs.
void build_basis(const BankDims& dims, const Eigen::VectorXd& q_min,
                 const Eigen::VectorXd& q_max, Eigen::MatrixXd& centers,
                 Eigen::VectorXd& widths) {
    const int n = dims.n;
    const int k = dims.k;
    const Eigen::VectorXd range = q_max - q_min;
    const Eigen::VectorXd mid = 0.5 * (q_min + q_max);
    centers.resize(n, k);
    widths.resize(k);

    // Tensor grid when k == g^n for an integer g >= 2.
    int g = -1;
    for (int cand = 2; ; ++cand) {
        double p = std::pow(static_cast<double>(cand), n);
        if (p > k + 0.5) break;
        if (std::llround(p) == k) { g = cand; break; }
    }

    if (g > 0) {
        const double mean_spacing = range.mean() / (g - 1);
        for (int j = 0; j < k; ++j) {
            int rem = j;
            for (int d = 0; d < n; ++d) {
                const int idx = rem % g;
                rem /= g;
                centers(d, j) = q_min(d) + range(d) * idx / (g - 1);
            }
            widths(j) = 1.5 * mean_spacing;
        }
        return;
    }

    if (k == 2 * n + 1) {
        // Center plus both extremes along each axis.
        const double mean_half = 0.5 * range.mean();
        centers.col(0) = mid;
        for (int d = 0; d < n; ++d) {
            centers.col(1 + 2 * d) = mid;
            centers.col(2 + 2 * d) = mid;
            centers(d, 1 + 2 * d) = q_min(d);
            centers(d, 2 + 2 * d) = q_max(d);
        }
        widths.setConstant(1.5 * mean_half);
        return;
    }

    // Scrambled Weyl lattice fallback.
    static const double primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    for (int j = 0; j < k; ++j) {
        for (int d = 0; d < n; ++d) {
            const double alpha = std::sqrt(primes[d % 12]);
            const double frac = std::fmod((j + 0.5) * alpha, 1.0);
            centers(d, j) = q_min(d) + range(d) * frac;
        }
    }
    widths.setConstant(1.5 * range.mean() * std::pow(1.0 / k, 1.0 / n));
}

}  // namespace

RbfBank init_bank(const BankDims& dims, const Eigen::VectorXd& q_min,
                  const Eigen::VectorXd& q_max, std::uint64_t seed,
                  double weight_scale) {
    if (dims.m < 1 || dims.n < 1 || dims.k < 1) {
        throw BadRange("bank dims must be positive");
    }
    if (q_min.size() != dims.n || q_max.size() != dims.n ||
        ((q_max - q_min).array() <= 0.0).any()) {
        throw BadRange("degenerate q range");
    }

    Eigen::MatrixXd basis_centers;
    Eigen::VectorXd basis_widths;
    build_basis(dims, q_min, q_max, basis_centers, basis_widths);

    RbfBank bank;
    bank.dims = dims;
    bank.nets.resize(static_cast<std::size_t>(dims.m));
    const double weight_std = std::sqrt(2.0 / dims.k) * weight_scale;

    for (int i = 0; i < dims.m; ++i) {
        auto& net = bank.nets[static_cast<std::size_t>(i)];
        Rng rng = Rng::derive(seed, 1000 + static_cast<std::uint64_t>(i));

        // Independent permutation of the shared basis per network.
        std::vector<int> order(static_cast<std::size_t>(dims.k));
        for (int j = 0; j < dims.k; ++j) order[static_cast<std::size_t>(j)] = j;
        for (int j = dims.k - 1; j > 0; --j) {
            const int swap_with =
                static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(j + 1));
            std::swap(order[static_cast<std::size_t>(j)],
                      order[static_cast<std::size_t>(swap_with)]);
        }

        net.centers.resize(dims.n, dims.k);
        net.widths.resize(dims.k);
        for (int j = 0; j < dims.k; ++j) {
            net.centers.col(j) = basis_centers.col(order[static_cast<std::size_t>(j)]);
            net.widths(j) = basis_widths(order[static_cast<std::size_t>(j)]);
        }

        net.weights.resize(dims.n, dims.k);
        for (int j = 0; j < dims.k; ++j) {
            for (int a = 0; a < dims.n; ++a) {
                net.weights(a, j) = rng.gauss(0.0, weight_std);
            }
        }
    }
    return bank;
}

std::string bank_to_json(const RbfBank& bank, bool oracle) {
    nlohmann::json doc;
    doc["kind"] = "rbf_bank";
    doc["oracle"] = oracle;
    doc["dims"] = {{"m", bank.dims.m}, {"n", bank.dims.n}, {"k", bank.dims.k}};
    nlohmann::json nets = nlohmann::json::array();
    for (const auto& net : bank.nets) {
        nlohmann::json jn;
        std::vector<double> centers(net.centers.data(),
                                    net.centers.data() + net.centers.size());
        std::vector<double> widths(net.widths.data(),
                                   net.widths.data() + net.widths.size());
        std::vector<double> weights(net.weights.data(),
                                    net.weights.data() + net.weights.size());
        jn["centers"] = centers;  // column-major n*k
        jn["widths"] = widths;
        jn["weights"] = weights;  // column-major n*k
        nets.push_back(jn);
    }
    doc["nets"] = nets;
    return doc.dump(2);
}

RbfBank bank_from_json(const std::string& text, bool* oracle) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bank JSON parse error: ") + e.what());
    }
    if (doc.value("kind", "") != "rbf_bank") {
        throw IoError("not an rbf_bank document");
    }
    RbfBank bank;
    bank.dims.m = doc.at("dims").at("m").get<int>();
    bank.dims.n = doc.at("dims").at("n").get<int>();
    bank.dims.k = doc.at("dims").at("k").get<int>();
    if (oracle) *oracle = doc.value("oracle", false);
    const auto& nets = doc.at("nets");
    if (static_cast<int>(nets.size()) != bank.dims.m) {
        throw IoError("bank net count does not match dims");
    }
    for (const auto& jn : nets) {
        RbfNetwork net;
        const auto centers = jn.at("centers").get<std::vector<double>>();
        const auto widths = jn.at("widths").get<std::vector<double>>();
        const auto weights = jn.at("weights").get<std::vector<double>>();
        const int n = bank.dims.n;
        const int k = bank.dims.k;
        if (static_cast<int>(centers.size()) != n * k ||
            static_cast<int>(widths.size()) != k ||
            static_cast<int>(weights.size()) != n * k) {
            throw IoError("bank array sizes do not match dims");
        }
        net.centers = Eigen::Map<const Eigen::MatrixXd>(centers.data(), n, k);
        net.widths = Eigen::Map<const Eigen::VectorXd>(widths.data(), k);
        net.weights = Eigen::Map<const Eigen::MatrixXd>(weights.data(), n, k);
        bank.nets.push_back(std::move(net));
    }
    return bank;
}

void save_bank(const RbfBank& bank, const std::string& path, bool oracle) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out << bank_to_json(bank, oracle);
    if (!out) throw IoError("write failed: " + path);
}

RbfBank load_bank(const std::string& path, bool* oracle) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for read: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return bank_from_json(text, oracle);
}

}  // namespace shapeservo
