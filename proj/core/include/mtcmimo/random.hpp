// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace mtcmimo {

using Engine = std::mt19937_64;

/// Mixes (master, stream, index) into an independent 64-bit seed (splitmix64
/// finalizer). Used to give every Monte-Carlo trial its own generator so that
/// results do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

/// Gaussian sample source bound to one engine.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double real() { return normal_(engine_); }

    /// Circularly-symmetric CN(0, variance).
    std::complex<double> complex(double variance = 1.0);

    /// Matrix with i.i.d. CN(0, variance) entries, filled column-major.
    Eigen::MatrixXcd complex_matrix(Eigen::Index rows, Eigen::Index cols, double variance = 1.0);

    Engine& engine() { return engine_; }

private:
    Engine engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Neumaier-compensated accumulator.
class CompensatedSum {
public:
    void add(double x);
    double value() const { return sum_ + comp_; }
    void merge(const CompensatedSum& other);

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Runs body(chunk) for chunk in [0, chunks) on up to `workers` threads.
/// Chunk boundaries are chosen by the caller, so results combined in chunk
/// order are identical for any worker count.
void parallel_chunks(std::size_t chunks, unsigned workers, const std::function<void(std::size_t)>& body);

/// Default worker count (hardware concurrency, at least 1).
unsigned default_workers();

/// Per-chunk sums of a vector-valued Monte-Carlo statistic. Trials are split
/// into contiguous chunks; every quantity below depends only on the chunk
/// layout, never on the worker count.
class BatchMeans {
public:
    BatchMeans(int chunks, int width);

    int chunks() const { return static_cast<int>(sizes_.size()); }
    int width() const { return static_cast<int>(sums_.cols()); }
    long long trials() const;

    /// Overall mean of every component.
    Eigen::VectorXd mean() const;

    /// Batch-means standard error of component `c`.
    double std_error(int c) const;

    /// Delete-one-chunk jackknife of a smooth statistic f(mean vector).
    double jackknife_std_error(const std::function<double(const Eigen::VectorXd&)>& f) const;

    void set_chunk(int chunk, long long size, const Eigen::VectorXd& sums);

private:
    std::vector<long long> sizes_;
    Eigen::MatrixXd sums_;  // chunks x width
};

/// Runs body(trial, out) for trial in [0, trials), where `out` has `width`
/// zero-initialised entries to fill. Sums are compensated per chunk.
BatchMeans run_batches(long long trials, int width, unsigned workers,
                       const std::function<void(long long, Eigen::Ref<Eigen::VectorXd>)>& body,
                       int chunks = 64);

} // namespace mtcmimo
