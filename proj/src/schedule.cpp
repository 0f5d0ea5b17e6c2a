#include "fedmap/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedmap/errors.hpp"

namespace fedmap::schedule {

namespace {

void validate(const ScheduleSpec& spec) {
    if (spec.interval == 0) throw StructuralError("schedule: interval must be positive");
    if (!(spec.rate > 0.0 && spec.rate < 1.0))
        throw StructuralError("schedule: rate must lie in (0, 1)");
    if (!(spec.floor_fraction > 0.0 && spec.floor_fraction <= 1.0))
        throw StructuralError("schedule: floor_fraction must lie in (0, 1]");
    if (spec.total_weights == 0) throw StructuralError("schedule: total_weights must be positive");
}

std::size_t quantize(const ScheduleSpec& spec, double fraction) {
    const double f = std::max(fraction, spec.floor_fraction);
    const double k = std::round(static_cast<double>(spec.total_weights) * f);
    return static_cast<std::size_t>(k);
}

double knot_fraction(const ScheduleSpec& spec, std::size_t k) {
    return std::pow(1.0 - spec.rate, static_cast<double>(k));
}

// Monotone piecewise cubic through the decay knots, tangents per
// Fritsch and Carlson so the interpolant never overshoots.
double continuous_fraction(const ScheduleSpec& spec, std::size_t t) {
    const std::size_t seg = t / spec.interval;
    if (t % spec.interval == 0) return knot_fraction(spec, seg);

    // Knots up to two intervals past the query pin down both tangents of the
    // active segment; later knots cannot reach back.
    const std::size_t nk = seg + 3;
    std::vector<double> y(nk);
    for (std::size_t k = 0; k < nk; ++k) y[k] = knot_fraction(spec, k);

    const double h = static_cast<double>(spec.interval);
    std::vector<double> d(nk - 1);
    for (std::size_t k = 0; k + 1 < nk; ++k) d[k] = (y[k + 1] - y[k]) / h;

    std::vector<double> m(nk);
    m[0] = d[0];
    m[nk - 1] = d[nk - 2];
    for (std::size_t k = 1; k + 1 < nk; ++k) m[k] = 0.5 * (d[k - 1] + d[k]);

    for (std::size_t k = 0; k + 1 < nk; ++k) {
        if (d[k] == 0.0) {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        double a = m[k] / d[k];
        double b = m[k + 1] / d[k];
        if (a < 0.0) {
            m[k] = 0.0;
            a = 0.0;
        }
        if (b < 0.0) {
            m[k + 1] = 0.0;
            b = 0.0;
        }
        const double r = a * a + b * b;
        if (r > 9.0) {
            const double tau = 3.0 / std::sqrt(r);
            m[k] = tau * a * d[k];
            m[k + 1] = tau * b * d[k];
        }
    }

    const double u = (static_cast<double>(t) - static_cast<double>(seg) * h) / h;
    const double u2 = u * u;
    const double u3 = u2 * u;
    const double h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    const double h10 = u3 - 2.0 * u2 + u;
    const double h01 = -2.0 * u3 + 3.0 * u2;
    const double h11 = u3 - u2;
    double f = h00 * y[seg] + h10 * h * m[seg] + h01 * y[seg + 1] + h11 * h * m[seg + 1];
    // Guard against round-off nudging past the bracketing knots.
    f = std::min(f, y[seg]);
    f = std::max(f, y[seg + 1]);
    return f;
}

} // namespace

std::size_t remaining_params(const ScheduleSpec& spec, std::size_t t) {
    validate(spec);
    if (spec.kind == Kind::Stepwise) return quantize(spec, knot_fraction(spec, t / spec.interval));
    return quantize(spec, continuous_fraction(spec, t));
}

std::vector<std::size_t> prune_events(const ScheduleSpec& spec) {
    validate(spec);
    std::vector<std::size_t> events;
    std::size_t prev = remaining_params(spec, 0);
    for (std::size_t t = 1; t <= spec.total_rounds; ++t) {
        const std::size_t cur = remaining_params(spec, t);
        if (cur < prev) events.push_back(t);
        prev = cur;
    }
    return events;
}

} // namespace fedmap::schedule
