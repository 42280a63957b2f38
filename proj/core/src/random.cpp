// SPDX-License-Identifier: Apache-2.0
#include "mtcmimo/random.hpp"
#include "mtcmimo/types.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace mtcmimo {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index)
{
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

std::complex<double> GaussianSource::complex(double variance)
{
    const double s = std::sqrt(variance / 2.0);
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {s * re, s * im};
}

Eigen::MatrixXcd GaussianSource::complex_matrix(Eigen::Index rows, Eigen::Index cols, double variance)
{
    Eigen::MatrixXcd out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
            out(r, c) = complex(variance);
    return out;
}

void CompensatedSum::add(double x)
{
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
        comp_ += (sum_ - t) + x;
    else
        comp_ += (x - t) + sum_;
    sum_ = t;
}

void CompensatedSum::merge(const CompensatedSum& other)
{
    add(other.sum_);
    add(other.comp_);
}

unsigned default_workers()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_chunks(std::size_t chunks, unsigned workers, const std::function<void(std::size_t)>& body)
{
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(chunks, 1))));
    if (workers == 1) {
        for (std::size_t c = 0; c < chunks; ++c)
            body(c);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t c = next.fetch_add(1);
                if (c >= chunks)
                    return;
                try {
                    body(c);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                    next = chunks;
                }
            }
        });
    }
    pool.clear();
    if (failure)
        std::rethrow_exception(failure);
}

BatchMeans::BatchMeans(int chunks, int width)
    : sizes_(static_cast<std::size_t>(chunks), 0), sums_(Eigen::MatrixXd::Zero(chunks, width))
{
    if (chunks < 1 || width < 1)
        throw ConfigError("batch means need at least one chunk and one component");
}

long long BatchMeans::trials() const
{
    long long n = 0;
    for (long long s : sizes_)
        n += s;
    return n;
}

Eigen::VectorXd BatchMeans::mean() const
{
    const long long n = trials();
    if (n == 0)
        return Eigen::VectorXd::Zero(width());
    Eigen::VectorXd out(width());
    for (int c = 0; c < width(); ++c) {
        CompensatedSum acc;
        for (int b = 0; b < chunks(); ++b)
            acc.add(sums_(b, c));
        out(c) = acc.value() / static_cast<double>(n);
    }
    return out;
}

double BatchMeans::std_error(int c) const
{
    const long long n = trials();
    int used = 0;
    for (long long s : sizes_)
        used += s > 0;
    if (used < 2)
        return std::numeric_limits<double>::infinity();
    const double m = mean()(c);
    double ss = 0.0;
    for (int b = 0; b < chunks(); ++b) {
        const auto size = static_cast<double>(sizes_[static_cast<std::size_t>(b)]);
        if (size == 0)
            continue;
        const double d = sums_(b, c) / size - m;
        ss += size * d * d;
    }
    return std::sqrt(ss / ((used - 1) * static_cast<double>(n)));
}

double BatchMeans::jackknife_std_error(const std::function<double(const Eigen::VectorXd&)>& f) const
{
    const long long n = trials();
    const Eigen::VectorXd total = sums_.colwise().sum().transpose();
    std::vector<double> theta;
    for (int b = 0; b < chunks(); ++b) {
        const long long size = sizes_[static_cast<std::size_t>(b)];
        if (size == 0 || size == n)
            continue;
        const Eigen::VectorXd loo = (total - sums_.row(b).transpose()) / static_cast<double>(n - size);
        theta.push_back(f(loo));
    }
    if (theta.size() < 2)
        return std::numeric_limits<double>::infinity();
    double mean_theta = 0.0;
    for (double t : theta)
        mean_theta += t;
    mean_theta /= static_cast<double>(theta.size());
    double ss = 0.0;
    for (double t : theta)
        ss += (t - mean_theta) * (t - mean_theta);
    const double g = static_cast<double>(theta.size());
    return std::sqrt((g - 1.0) / g * ss);
}

void BatchMeans::set_chunk(int chunk, long long size, const Eigen::VectorXd& sums)
{
    sizes_.at(static_cast<std::size_t>(chunk)) = size;
    sums_.row(chunk) = sums.transpose();
}

BatchMeans run_batches(long long trials, int width, unsigned workers,
                       const std::function<void(long long, Eigen::Ref<Eigen::VectorXd>)>& body, int chunks)
{
    if (trials < 1)
        throw ConfigError("need at least one trial");
    chunks = static_cast<int>(std::min<long long>(chunks, trials));
    BatchMeans out(chunks, width);
    parallel_chunks(static_cast<std::size_t>(chunks), workers, [&](std::size_t chunk) {
        const auto c = static_cast<long long>(chunk);
        const long long begin = trials * c / chunks;
        const long long end = trials * (c + 1) / chunks;
        std::vector<CompensatedSum> acc(static_cast<std::size_t>(width));
        Eigen::VectorXd sample(width);
        for (long long t = begin; t < end; ++t) {
            sample.setZero();
            body(t, sample);
            for (int i = 0; i < width; ++i)
                acc[static_cast<std::size_t>(i)].add(sample(i));
        }
        Eigen::VectorXd sums(width);
        for (int i = 0; i < width; ++i)
            sums(i) = acc[static_cast<std::size_t>(i)].value();
        out.set_chunk(static_cast<int>(chunk), end - begin, sums);
    });
    return out;
}

} // namespace mtcmimo
