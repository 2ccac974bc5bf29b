#pragma once

// JSON readers for episodes and cluster specs.
//
// Episode:
//   {"classes": [{"id": "a", "support": [[f, ...], ...]}, ...],
//    "query": [[f, ...], ...]}
//
// ClusterSpec, explicit:
//   {"means": [[f, ...], ...], "stddev": f}
// or generated (stddev defaults to 0.6):
//   {"way": n, "dim": d, "mean_norm_range": [lo, hi], "min_angle_deg": a,
//    "seed": s, "stddev": f}

#include <filesystem>
#include <iosfwd>

#include "shotmetric/episode_synth.hpp"
#include "shotmetric/metric_heads.hpp"

namespace shotmetric {

Episode parse_episode_json(std::istream& in);
Episode read_episode_json(const std::filesystem::path& path);

ClusterSpec parse_cluster_spec_json(std::istream& in);
ClusterSpec read_cluster_spec_json(const std::filesystem::path& path);

}  // namespace shotmetric
