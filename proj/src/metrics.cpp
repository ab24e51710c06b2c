#include "tessera/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "tessera/error.hpp"
#include "tessera/grid_index.hpp"

namespace tessera {

namespace {

void require_points(const SurfaceSamples& s, const char* who) {
    if (s.points.empty()) throw PreconditionError(std::string(who) + ": empty sample set");
}

void require_normals(const SurfaceSamples& s, const char* who) {
    if (s.normals.size() != s.points.size())
        throw PreconditionError(std::string(who) + ": samples carry no normals");
}

}  // namespace

std::pair<double, double> chamfer(const SurfaceSamples& a, const SurfaceSamples& b) {
    require_points(a, "chamfer");
    require_points(b, "chamfer");
    const PointGridIndex ia(a.points);
    const PointGridIndex ib(b.points);
    const std::vector<PointGridIndex::Hit> ab = ib.nearest_batch(a.points);
    const std::vector<PointGridIndex::Hit> ba = ia.nearest_batch(b.points);

    // Reductions stay serial and in index order so results are bitwise equal
    // to the serial reference.
    double sum_l1_ab = 0.0, sum_l2_ab = 0.0;
    for (const PointGridIndex::Hit& h : ab) {
        sum_l1_ab += std::sqrt(h.squared_dist);
        sum_l2_ab += h.squared_dist;
    }
    double sum_l1_ba = 0.0, sum_l2_ba = 0.0;
    for (const PointGridIndex::Hit& h : ba) {
        sum_l1_ba += std::sqrt(h.squared_dist);
        sum_l2_ba += h.squared_dist;
    }
    const double na = static_cast<double>(a.points.size());
    const double nb = static_cast<double>(b.points.size());
    return {0.5 * (sum_l1_ab / na + sum_l1_ba / nb), 0.5 * (sum_l2_ab / na + sum_l2_ba / nb)};
}

double hausdorff(const SurfaceSamples& a, const SurfaceSamples& b) {
    require_points(a, "hausdorff");
    require_points(b, "hausdorff");
    const PointGridIndex ia(a.points);
    const PointGridIndex ib(b.points);
    const std::vector<PointGridIndex::Hit> ab = ib.nearest_batch(a.points);
    const std::vector<PointGridIndex::Hit> ba = ia.nearest_batch(b.points);
    double worst = 0.0;
    for (const PointGridIndex::Hit& h : ab) worst = std::max(worst, std::sqrt(h.squared_dist));
    for (const PointGridIndex::Hit& h : ba) worst = std::max(worst, std::sqrt(h.squared_dist));
    return worst;
}

double normal_consistency(const SurfaceSamples& a, const SurfaceSamples& b) {
    require_points(a, "normal_consistency");
    require_points(b, "normal_consistency");
    require_normals(a, "normal_consistency");
    require_normals(b, "normal_consistency");
    const PointGridIndex ia(a.points);
    const PointGridIndex ib(b.points);
    const std::vector<PointGridIndex::Hit> ab = ib.nearest_batch(a.points);
    const std::vector<PointGridIndex::Hit> ba = ia.nearest_batch(b.points);

    // A zero-distance match with a bitwise-identical normal contributes
    // exactly 1 (normals are unit by invariant); this keeps the identity case
    // exact under floating point. Other terms are clamped to 1.
    const auto accumulate = [](const std::vector<PointGridIndex::Hit>& hits,
                               const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double sum = 0.0;
        for (std::size_t i = 0; i < hits.size(); ++i) {
            const Vec3& na = from[i];
            const Vec3& nb = to[static_cast<std::size_t>(hits[i].index)];
            if (hits[i].squared_dist == 0.0 && na.x == nb.x && na.y == nb.y && na.z == nb.z) {
                sum += 1.0;
                continue;
            }
            sum += std::min(std::abs(dot(na, nb)), 1.0);
        }
        return sum / static_cast<double>(hits.size());
    };
    return 0.5 * (accumulate(ab, a.normals, b.normals) + accumulate(ba, b.normals, a.normals));
}

double f_score(const SurfaceSamples& a, const SurfaceSamples& b, double tau) {
    require_points(a, "f_score");
    require_points(b, "f_score");
    if (!(tau > 0.0)) throw PreconditionError("f_score: tau must be positive");
    const PointGridIndex ia(a.points);
    const PointGridIndex ib(b.points);
    const std::vector<PointGridIndex::Hit> ab = ib.nearest_batch(a.points);
    const std::vector<PointGridIndex::Hit> ba = ia.nearest_batch(b.points);
    const double tau2 = tau * tau;
    long long hits_a = 0, hits_b = 0;
    for (const PointGridIndex::Hit& h : ab) hits_a += h.squared_dist <= tau2 ? 1 : 0;
    for (const PointGridIndex::Hit& h : ba) hits_b += h.squared_dist <= tau2 ? 1 : 0;
    const double precision = static_cast<double>(hits_a) / static_cast<double>(a.points.size());
    const double recall = static_cast<double>(hits_b) / static_cast<double>(b.points.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

SurfaceSamples extract_edge_samples(const SurfaceSamples& s, double radius, double normal_dot_threshold) {
    require_points(s, "extract_edge_samples");
    require_normals(s, "extract_edge_samples");
    const int n = static_cast<int>(s.points.size());
    std::vector<char> keep(static_cast<std::size_t>(n), 0);
    if (radius > 0.0) {
        const PointGridIndex index(s.points);
#pragma omp parallel for schedule(dynamic, 64)
        for (int i = 0; i < n; ++i) {
            bool found = false;
            index.for_each_within(s.points[static_cast<std::size_t>(i)], radius, [&](int j, double) {
                if (found || j == i) return;
                if (std::abs(dot(s.normals[static_cast<std::size_t>(i)], s.normals[static_cast<std::size_t>(j)])) <
                    normal_dot_threshold)
                    found = true;
            });
            keep[static_cast<std::size_t>(i)] = found ? 1 : 0;
        }
    }
    SurfaceSamples out;
    out.seed = s.seed;
    for (int i = 0; i < n; ++i) {
        if (!keep[static_cast<std::size_t>(i)]) continue;
        out.points.push_back(s.points[static_cast<std::size_t>(i)]);
        out.normals.push_back(s.normals[static_cast<std::size_t>(i)]);
    }
    out.count = static_cast<int>(out.points.size());
    return out;
}

MetricsReport evaluate(const Mesh& generated, const Mesh& reference, const EvalOptions& opts) {
    if (generated.faces.empty()) throw PreconditionError("evaluate: generated mesh is empty");
    if (reference.faces.empty()) throw PreconditionError("evaluate: reference mesh is empty");
    if (opts.sample_count < 1) throw PreconditionError("evaluate: sample_count must be positive");

    const SurfaceSamples sg = sample_surface(generated, opts.sample_count, opts.seed_generated);
    const SurfaceSamples sr = sample_surface(reference, opts.sample_count, opts.seed_reference);

    MetricsReport report;
    report.sample_count = opts.sample_count;
    report.tau = opts.tau;
    report.edge_params = opts.edge_params;

    const auto [cd_l1, cd_l2] = chamfer(sg, sr);
    report.cd_l1 = cd_l1;
    report.cd_l2_x1000 = cd_l2 * 1000.0;
    report.hd = hausdorff(sg, sr);
    report.nc = normal_consistency(sg, sr);
    report.f1 = f_score(sg, sr, opts.tau);

    const SurfaceSamples eg =
        extract_edge_samples(sg, opts.edge_params.radius, opts.edge_params.normal_dot_threshold);
    const SurfaceSamples er =
        extract_edge_samples(sr, opts.edge_params.radius, opts.edge_params.normal_dot_threshold);
    if (eg.points.empty() || er.points.empty()) {
        report.edge_degenerate = true;
        report.ecd = report.hd;
        report.ef1 = 0.0;
    } else {
        report.ecd = chamfer(eg, er).first;
        report.ef1 = f_score(eg, er, opts.tau);
    }
    return report;
}

}  // namespace tessera
