#include "causalwrap/base_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "causalwrap/errors.hpp"
#include "causalwrap/fitting.hpp"
#include "causalwrap/log.hpp"

namespace cw {

namespace {

// Average-rank normal scores: ties share the mean of their rank range.
Eigen::VectorXd normal_scores(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&x](int a, int b) { return x(a) < x(b); });
    Eigen::VectorXd rank(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && x(order[static_cast<std::size_t>(j + 1)]) == x(order[static_cast<std::size_t>(i)])) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index t = i; t <= j; ++t) rank(order[static_cast<std::size_t>(t)]) = avg;
        i = j + 1;
    }
    Eigen::VectorXd z(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        z(r) = normal_quantile(rank(r) / static_cast<double>(n + 1));
    }
    return z;
}

// Interpolated (type-7) empirical quantile on a sorted vector.
double empirical_quantile(const std::vector<double>& sorted, double u) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = std::clamp(u, 0.0, 1.0) * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::min(h, static_cast<double>(n - 2)));
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

Eigen::MatrixXd jittered_cholesky(Eigen::MatrixXd corr) {
    for (double jitter : {0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2}) {
        Eigen::MatrixXd attempt = corr;
        attempt.diagonal().array() += jitter;
        const Eigen::LLT<Eigen::MatrixXd> llt(attempt);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw NumericError("copula: correlation matrix is not factorizable");
}

}  // namespace

GaussianCopulaSampler::GaussianCopulaSampler(const Table& real) {
    if (real.n() < 50) throw ValidationError("copula: need at least 50 rows to fit");
    schema_ = real.schema;
    spec_ = "copula";
    const int d = real.d();
    sorted_.resize(static_cast<std::size_t>(d));
    binary_mean_.assign(static_cast<std::size_t>(d), 0.0);

    Eigen::MatrixXd scores(real.n(), d);
    for (int j = 0; j < d; ++j) {
        scores.col(j) = normal_scores(real.rows.col(j));
        if (real.schema[static_cast<std::size_t>(j)].kind == ColumnKind::Binary) {
            binary_mean_[static_cast<std::size_t>(j)] = real.rows.col(j).mean();
        } else {
            auto& s = sorted_[static_cast<std::size_t>(j)];
            s.assign(real.rows.col(j).data(), real.rows.col(j).data() + real.n());
            std::sort(s.begin(), s.end());
        }
    }

    corr_ = Eigen::MatrixXd::Identity(d, d);
    const Eigen::RowVectorXd mean = scores.colwise().mean();
    const Eigen::MatrixXd centered = scores.rowwise() - mean;
    for (int a = 0; a < d; ++a) {
        for (int b = a + 1; b < d; ++b) {
            const double denom =
                std::sqrt(centered.col(a).squaredNorm() * centered.col(b).squaredNorm());
            // Constant columns have zero score variance; leave them uncorrelated.
            const double r = denom < 1e-12 ? 0.0 : centered.col(a).dot(centered.col(b)) / denom;
            corr_(a, b) = r;
            corr_(b, a) = r;
        }
    }
    chol_ = jittered_cholesky(corr_);
}

Table GaussianCopulaSampler::draw(int n, Rng& rng) const {
    if (n <= 0) throw ValidationError("copula: batch size must be positive");
    const int d = static_cast<int>(schema_.size());
    Table t;
    t.schema = schema_;
    t.provenance = Provenance::BaseSynthetic;
    t.rows.resize(n, d);
    Eigen::VectorXd g(d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) g(j) = rng.normal();
        const Eigen::VectorXd w = chol_ * g;
        for (int j = 0; j < d; ++j) {
            if (schema_[static_cast<std::size_t>(j)].kind == ColumnKind::Binary) {
                const double p = binary_mean_[static_cast<std::size_t>(j)];
                if (p <= 0.0) {
                    t.rows(i, j) = 0.0;
                } else if (p >= 1.0) {
                    t.rows(i, j) = 1.0;
                } else {
                    t.rows(i, j) = w(j) > normal_quantile(1.0 - p) ? 1.0 : 0.0;
                }
            } else {
                t.rows(i, j) = empirical_quantile(sorted_[static_cast<std::size_t>(j)], normal_cdf(w(j)));
            }
        }
    }
    return t;
}

NoisyBootstrapSampler::NoisyBootstrapSampler(const Table& real, double noise) : noise_(noise) {
    if (noise < 0.0) throw ValidationError("bootstrap: noise must be nonnegative");
    if (real.n() < 1) throw ValidationError("bootstrap: empty source table");
    schema_ = real.schema;
    spec_ = "bootstrap:" + std::to_string(noise);
    pool_ = real.rows;
    col_std_.resize(real.d());
    for (int j = 0; j < real.d(); ++j) {
        const double mean = pool_.col(j).mean();
        const double denom = std::max<double>(1.0, static_cast<double>(pool_.rows()) - 1.0);
        col_std_(j) = std::sqrt((pool_.col(j).array() - mean).square().sum() / denom);
    }
}

Table NoisyBootstrapSampler::draw(int n, Rng& rng) const {
    if (n <= 0) throw ValidationError("bootstrap: batch size must be positive");
    const int d = static_cast<int>(schema_.size());
    Table t;
    t.schema = schema_;
    t.provenance = Provenance::BaseSynthetic;
    t.rows.resize(n, d);
    for (int i = 0; i < n; ++i) {
        const int src = rng.uniform_int(static_cast<int>(pool_.rows()));
        for (int j = 0; j < d; ++j) {
            double v = pool_(src, j);
            if (schema_[static_cast<std::size_t>(j)].kind == ColumnKind::Binary) {
                if (rng.uniform() < noise_ / 10.0) v = 1.0 - v;
            } else {
                v += noise_ * col_std_(j) * rng.normal();
            }
            t.rows(i, j) = v;
        }
    }
    return t;
}

FileBackedSampler::FileBackedSampler(Table pool, std::string path) {
    if (pool.n() < 1) throw ValidationError("file sampler: empty pool");
    schema_ = pool.schema;
    spec_ = "file:" + std::move(path);
    pool_ = std::move(pool);
}

Table FileBackedSampler::draw(int n, Rng& rng) const {
    if (n <= 0) throw ValidationError("file sampler: batch size must be positive");
    if (n > pool_size()) {
        throw ValidationError("file sampler: pool of " + std::to_string(pool_size()) +
                              " rows cannot cover a batch of " + std::to_string(n));
    }
    if (pool_size() < 5 * n) {
        log::warn("base sample pool is under 5x the requested batch; draws will repeat often");
    }
    Table t;
    t.schema = schema_;
    t.provenance = Provenance::BaseSynthetic;
    t.rows.resize(n, static_cast<int>(schema_.size()));
    for (int i = 0; i < n; ++i) {
        t.rows.row(i) = pool_.rows.row(rng.uniform_int(pool_size()));
    }
    return t;
}

std::unique_ptr<BaseSampler> fit_gaussian_copula(const Table& real) {
    return std::make_unique<GaussianCopulaSampler>(real);
}

std::unique_ptr<BaseSampler> noisy_bootstrap(const Table& real, double noise) {
    return std::make_unique<NoisyBootstrapSampler>(real, noise);
}

std::unique_ptr<BaseSampler> load_samples(const std::string& path,
                                          const std::vector<ColumnSchema>& schema,
                                          bool relaxed_binary) {
    Table t = read_csv(path, relaxed_binary);
    t.provenance = Provenance::BaseSynthetic;
    if (t.schema.size() != schema.size()) {
        throw ValidationError("base samples: expected " + std::to_string(schema.size()) +
                              " columns, file has " + std::to_string(t.schema.size()));
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (t.schema[j].name != schema[j].name) {
            throw ValidationError("base samples: column '" + t.schema[j].name +
                                  "' does not match expected '" + schema[j].name + "'");
        }
    }
    // Re-declare the expected kinds; relaxed mode legalizes off-grid values in
    // declared-binary columns for base synthetic data only.
    for (std::size_t j = 0; j < schema.size(); ++j) t.schema[j].kind = schema[j].kind;
    validate_table(t, relaxed_binary);
    return std::make_unique<FileBackedSampler>(std::move(t), path);
}

std::unique_ptr<BaseSampler> make_base_sampler(const std::string& spec, const Table& real,
                                               bool relaxed_binary) {
    if (spec == "copula") return fit_gaussian_copula(real);
    if (spec.rfind("bootstrap:", 0) == 0) {
        const std::string arg = spec.substr(10);
        std::size_t used = 0;
        double noise = 0.0;
        try {
            noise = std::stod(arg, &used);
        } catch (const std::exception&) {
            throw ValidationError("base spec: bad bootstrap noise '" + arg + "'");
        }
        if (used != arg.size()) throw ValidationError("base spec: bad bootstrap noise '" + arg + "'");
        return noisy_bootstrap(real, noise);
    }
    if (spec.rfind("file:", 0) == 0) {
        return load_samples(spec.substr(5), real.schema, relaxed_binary);
    }
    throw ValidationError("base spec: expected 'copula', 'bootstrap:<noise>', or 'file:<path>', got '" +
                          spec + "'");
}

}  // namespace cw
