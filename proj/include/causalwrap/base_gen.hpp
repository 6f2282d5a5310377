#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "causalwrap/rng.hpp"
#include "causalwrap/table.hpp"

namespace cw {

// Black-box generator contract: all the pipeline may do is draw batches.
class BaseSampler {
public:
    virtual ~BaseSampler() = default;
    virtual Table draw(int n, Rng& rng) const = 0;
    const std::vector<ColumnSchema>& schema() const { return schema_; }
    const std::string& spec() const { return spec_; }

protected:
    std::vector<ColumnSchema> schema_;
    std::string spec_;
};

// Gaussian copula over empirical marginals: rank-based normal scores supply
// the correlation; sampling inverts each marginal (interpolated empirical
// quantile for continuous columns, thresholded Bernoulli for binary ones).
class GaussianCopulaSampler final : public BaseSampler {
public:
    explicit GaussianCopulaSampler(const Table& real);
    Table draw(int n, Rng& rng) const override;
    const Eigen::MatrixXd& correlation() const { return corr_; }

private:
    Eigen::MatrixXd corr_;
    Eigen::MatrixXd chol_;                      // lower factor, jitter-rescued
    std::vector<std::vector<double>> sorted_;   // per continuous column
    std::vector<double> binary_mean_;
};

// Row resampling with Gaussian jitter on continuous columns and rare flips
// (probability noise/10) on binary ones.
class NoisyBootstrapSampler final : public BaseSampler {
public:
    NoisyBootstrapSampler(const Table& real, double noise);
    Table draw(int n, Rng& rng) const override;

private:
    Eigen::MatrixXd pool_;
    Eigen::VectorXd col_std_;
    double noise_ = 0.0;
};

// Finite pool of externally generated samples, drawn with replacement.
class FileBackedSampler final : public BaseSampler {
public:
    FileBackedSampler(Table pool, std::string path);
    Table draw(int n, Rng& rng) const override;
    int pool_size() const { return static_cast<int>(pool_.rows.rows()); }

private:
    Table pool_;
};

std::unique_ptr<BaseSampler> fit_gaussian_copula(const Table& real);
std::unique_ptr<BaseSampler> noisy_bootstrap(const Table& real, double noise);
std::unique_ptr<BaseSampler> load_samples(const std::string& path,
                                          const std::vector<ColumnSchema>& schema,
                                          bool relaxed_binary = false);

// Spec strings: "copula", "bootstrap:<noise>", "file:<path>".
std::unique_ptr<BaseSampler> make_base_sampler(const std::string& spec, const Table& real,
                                               bool relaxed_binary = false);

}  // namespace cw
