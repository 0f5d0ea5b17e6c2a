#include "fedmap/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "fedmap/errors.hpp"
#include "fedmap/rng.hpp"

namespace fedmap::data {

namespace {

// Orthonormal basis from seeded Gaussian draws, Gram-Schmidt column by column.
std::vector<double> random_rotation(std::size_t dim, rng::Stream& st) {
    std::vector<double> q(dim * dim);
    for (std::size_t c = 0; c < dim; ++c) {
        std::vector<double> v(dim);
        for (;;) {
            for (std::size_t r = 0; r < dim; ++r) v[r] = st.next_normal();
            for (std::size_t p = 0; p < c; ++p) {
                double dot = 0.0;
                for (std::size_t r = 0; r < dim; ++r) dot += v[r] * q[r * dim + p];
                for (std::size_t r = 0; r < dim; ++r) v[r] -= dot * q[r * dim + p];
            }
            double norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (std::size_t r = 0; r < dim; ++r) q[r * dim + c] = v[r] / norm;
                break;
            }
        }
    }
    return q;
}

// Centered unit simplex vertices, embedded (or truncated) into `dim` coords
// and pushed out to a fixed radius.
std::vector<std::vector<double>> class_means(std::size_t classes, std::size_t dim,
                                             rng::Stream& st) {
    const double radius = 2.0;
    std::vector<double> rot = random_rotation(dim, st);
    std::vector<std::vector<double>> means(classes, std::vector<double>(dim, 0.0));
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> v(dim, 0.0);
        for (std::size_t j = 0; j < dim; ++j) {
            double coord = -1.0 / static_cast<double>(classes);
            if (j == c) coord += 1.0;
            if (j < classes) v[j] = coord;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& x : v) x *= radius / norm;
        for (std::size_t r = 0; r < dim; ++r) {
            double acc = 0.0;
            for (std::size_t j = 0; j < dim; ++j) acc += rot[r * dim + j] * v[j];
            means[c][r] = acc;
        }
    }
    return means;
}

// floor(share * total) per cell, then hand out the leftovers by largest
// fractional part (ties to the lower index).
std::vector<std::size_t> largest_remainder(const std::vector<double>& shares, std::size_t total) {
    const std::size_t n = shares.size();
    std::vector<std::size_t> counts(n);
    std::vector<double> frac(n);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double exact = shares[i] * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(exact);
        frac[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; assigned < total; ++i) {
        ++counts[order[i % n]];
        ++assigned;
    }
    return counts;
}

Dataset take_rows(const Dataset& src, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.dim = src.dim;
    out.num_classes = src.num_classes;
    out.features.reserve(rows.size() * src.dim);
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) {
        const double* f = src.row(r);
        out.features.insert(out.features.end(), f, f + src.dim);
        out.labels.push_back(src.labels[r]);
    }
    return out;
}

} // namespace

DataSplit synth_blobs(std::size_t classes, std::size_t dim, std::size_t n, double spread,
                      std::uint64_t seed) {
    if (classes < 2) throw StructuralError("synth_blobs: need at least 2 classes");
    if (n < classes) throw StructuralError("synth_blobs: need at least one example per class");
    if (dim == 0) throw StructuralError("synth_blobs: dim must be positive");
    if (spread < 0.0) throw StructuralError("synth_blobs: spread must be non-negative");

    rng::Stream st(seed);
    const auto means = class_means(classes, dim, st);

    Dataset all;
    all.dim = dim;
    all.num_classes = classes;
    all.features.resize(n * dim);
    all.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % classes;
        all.labels[i] = static_cast<int>(c);
        double* row = all.features.data() + i * dim;
        for (std::size_t j = 0; j < dim; ++j) row[j] = means[c][j] + spread * st.next_normal();
    }

    const std::size_t n_test = n / 5;
    const std::size_t n_train = n - n_test;
    std::vector<std::size_t> train_rows(n_train), test_rows(n_test);
    std::iota(train_rows.begin(), train_rows.end(), 0);
    std::iota(test_rows.begin(), test_rows.end(), n_train);

    DataSplit split;
    split.train = take_rows(all, train_rows);
    split.test = take_rows(all, test_rows);
    return split;
}

std::vector<Dataset> partition(const Dataset& dataset, const PartitionSpec& spec) {
    const std::size_t N = spec.clients;
    const std::size_t n = dataset.labels.size();
    if (N == 0) throw StructuralError("partition: need at least one client");
    if (n < N) throw StructuralError("partition: fewer examples than clients");
    if (spec.mode == PartitionMode::DirichletLabelSkew && spec.beta <= 0.0)
        throw StructuralError("partition: beta must be positive");
    if (spec.mode == PartitionMode::SizeSkew && spec.skew_factor <= 0.0)
        throw StructuralError("partition: skew_factor must be positive");

    rng::Stream st(spec.seed);
    std::vector<std::vector<std::size_t>> assigned(N);

    if (spec.mode == PartitionMode::Iid || spec.mode == PartitionMode::SizeSkew) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        st.shuffle(order);

        std::vector<double> shares(N);
        if (spec.mode == PartitionMode::Iid) {
            std::fill(shares.begin(), shares.end(), 1.0 / static_cast<double>(N));
        } else {
            double total = 0.0;
            for (std::size_t k = 0; k < N; ++k) {
                shares[k] = std::pow(spec.skew_factor, static_cast<double>(k));
                total += shares[k];
            }
            for (double& s : shares) s /= total;
        }
        const std::vector<std::size_t> counts = largest_remainder(shares, n);
        std::size_t pos = 0;
        for (std::size_t k = 0; k < N; ++k) {
            assigned[k].assign(order.begin() + pos, order.begin() + pos + counts[k]);
            pos += counts[k];
        }
    } else {
        // Each client draws its own label distribution; per class the draws
        // are renormalized over clients and the class's examples dealt out.
        const std::size_t C = dataset.num_classes;
        std::vector<std::vector<double>> prefs(N);
        for (std::size_t k = 0; k < N; ++k) prefs[k] = st.next_dirichlet(spec.beta, C);

        for (std::size_t c = 0; c < C; ++c) {
            std::vector<std::size_t> rows;
            for (std::size_t i = 0; i < n; ++i)
                if (dataset.labels[i] == static_cast<int>(c)) rows.push_back(i);
            if (rows.empty()) continue;
            st.shuffle(rows);

            std::vector<double> shares(N);
            double total = 0.0;
            for (std::size_t k = 0; k < N; ++k) total += prefs[k][c];
            for (std::size_t k = 0; k < N; ++k) shares[k] = prefs[k][c] / total;

            const std::vector<std::size_t> counts = largest_remainder(shares, rows.size());
            std::size_t pos = 0;
            for (std::size_t k = 0; k < N; ++k) {
                assigned[k].insert(assigned[k].end(), rows.begin() + pos,
                                   rows.begin() + pos + counts[k]);
                pos += counts[k];
            }
        }
        for (auto& rows : assigned) std::sort(rows.begin(), rows.end());
    }

    std::vector<Dataset> out;
    out.reserve(N);
    for (std::size_t k = 0; k < N; ++k) {
        if (assigned[k].empty())
            throw StructuralError("partition: client " + std::to_string(k) +
                                  " would receive no examples");
        out.push_back(take_rows(dataset, assigned[k]));
    }
    return out;
}

void export_csv(const Dataset& dataset, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("export_csv: cannot open " + path);
    for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
        const double* row = dataset.row(i);
        for (std::size_t j = 0; j < dataset.dim; ++j) std::fprintf(f, "%.17g,", row[j]);
        std::fprintf(f, "%d\n", dataset.labels[i]);
    }
    std::fclose(f);
}

} // namespace fedmap::data
