#include "gcq/observation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gcq/error.hpp"

namespace gcq::obs {

namespace {

std::ptrdiff_t find_slot(const std::vector<VehicleId>& ids, std::size_t n_real, VehicleId id) {
  auto end = ids.begin() + static_cast<std::ptrdiff_t>(n_real);
  auto it = std::lower_bound(ids.begin(), end, id);
  return (it != end && *it == id) ? it - ids.begin() : -1;
}

bool senses(const sim::Vehicle& cav, const sim::Vehicle& hdv, double range) {
  return std::abs(hdv.position - cav.position) <= range;
}

}  // namespace

std::ptrdiff_t ObservationTensor::slot_of(VehicleId id) const {
  return find_slot(slot_ids, n_real, id);
}

std::vector<double> node_feature(const sim::Vehicle& v, const sim::RoadSpec& road) {
  std::vector<double> row(feature_width(road.lane_count), 0.0);
  row[0] = v.speed / road.speed_limit_cav;
  row[1] = v.position / road.corridor_length;
  row[2 + static_cast<std::size_t>(v.lane)] = 1.0;
  const std::size_t intent = 2 + static_cast<std::size_t>(road.lane_count);
  switch (v.intention) {
    case sim::Intention::Ramp1: row[intent + 0] = 1.0; break;
    case sim::Intention::Ramp2: row[intent + 1] = 1.0; break;
    case sim::Intention::Through: row[intent + 2] = 1.0; break;
    case sim::Intention::Unobserved: break;
  }
  return row;
}

std::vector<VehicleId> sense_neighbors(const sim::SimState& state, VehicleId cav_id, double range) {
  const sim::Vehicle* cav = state.find(cav_id);
  if (!cav || !cav->is_cav())
    throw StateError("sense_neighbors: " + std::to_string(cav_id) + " is not an alive CAV");
  std::vector<VehicleId> out;
  for (const auto& v : state.vehicles) {
    if (v.alive && v.kind == sim::VehicleKind::HDV && senses(*cav, v, range)) out.push_back(v.id);
  }
  return out;
}

FeatureRows build_features(const sim::SimState& state, const sim::RoadSpec& road,
                           double sensing_range) {
  std::vector<const sim::Vehicle*> cavs;
  for (const auto& v : state.vehicles)
    if (v.alive && v.is_cav()) cavs.push_back(&v);

  std::vector<const sim::Vehicle*> visible;
  for (const auto& v : state.vehicles) {
    if (!v.alive) continue;
    if (v.is_cav() || std::any_of(cavs.begin(), cavs.end(),
                                  [&](const sim::Vehicle* c) { return senses(*c, v, sensing_range); }))
      visible.push_back(&v);
  }
  // state.vehicles is kept in ascending id order already.
  FeatureRows rows;
  const std::size_t F = feature_width(road.lane_count);
  rows.X = Matrix(visible.size(), F);
  for (std::size_t i = 0; i < visible.size(); ++i) {
    const auto f = node_feature(*visible[i], road);
    std::copy(f.begin(), f.end(), rows.X.row(i).begin());
    rows.slot_ids.push_back(visible[i]->id);
    rows.mask.push_back(visible[i]->is_cav() ? 1 : 0);
  }
  return rows;
}

Matrix build_adjacency(const sim::SimState& state, const std::vector<VehicleId>& ids,
                       double sensing_range) {
  const std::size_t n = ids.size();
  Matrix A(n, n);
  std::vector<const sim::Vehicle*> vs(n);
  for (std::size_t i = 0; i < n; ++i) {
    vs[i] = state.find(ids[i]);
    if (!vs[i]) throw StateError("build_adjacency: unknown vehicle " + std::to_string(ids[i]));
  }
  auto link = [&](std::size_t i, std::size_t j) {
    if (i == j) return;
    A(i, j) = 1.0;
    A(j, i) = 1.0;
  };
  for (std::size_t c = 0; c < n; ++c) {
    if (!vs[c]->is_cav()) continue;
    std::vector<std::size_t> sensed;
    for (std::size_t h = 0; h < n; ++h) {
      if (vs[h]->kind == sim::VehicleKind::HDV && senses(*vs[c], *vs[h], sensing_range))
        sensed.push_back(h);
    }
    // (1) ego CAV to each sensed HDV
    for (std::size_t h : sensed) link(c, h);
    // (2) CAV clique
    for (std::size_t o = 0; o < n; ++o)
      if (vs[o]->is_cav()) link(c, o);
    // (3) HDVs sensed by this CAV form a clique
    for (std::size_t a = 0; a < sensed.size(); ++a)
      for (std::size_t b = a + 1; b < sensed.size(); ++b) link(sensed[a], sensed[b]);
  }
  return A;
}

ObservationTensor pad(const Matrix& X, const Matrix& A, const std::vector<std::uint8_t>& mask,
                      const std::vector<VehicleId>& slot_ids, std::size_t n_max) {
  const std::size_t n = X.rows();
  if (A.rows() != n || A.cols() != n || mask.size() != n || slot_ids.size() != n)
    throw ShapeError("pad: inconsistent row counts");
  if (n > n_max) {
    throw CapacityError("observation has " + std::to_string(n) +
                        " vehicles but n_max is configured as " + std::to_string(n_max));
  }
  ObservationTensor out;
  out.n_real = n;
  out.X = Matrix(n_max, X.cols());
  out.A = Matrix(n_max, n_max);
  out.mask.assign(n_max, 0);
  out.slot_ids.assign(n_max, kPaddingSlot);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(X.row(i).begin(), X.row(i).end(), out.X.row(i).begin());
    for (std::size_t j = 0; j < n; ++j) out.A(i, j) = A(i, j);
    out.mask[i] = mask[i];
    out.slot_ids[i] = slot_ids[i];
  }
  return out;
}

Matrix normalize_adjacency(const Matrix& A) {
  if (A.rows() != A.cols()) throw ShapeError("normalize_adjacency: matrix must be square");
  const std::size_t n = A.rows();
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) deg += A(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a_hat = (i == j) ? 1.0 : A(i, j);
      if (a_hat != 0.0) out(i, j) = inv_sqrt_deg[i] * a_hat * inv_sqrt_deg[j];
    }
  }
  return out;
}

ObservationTensor observe(const sim::SimState& state, const sim::RoadSpec& road,
                          const ObservationParams& params) {
  auto rows = build_features(state, road, params.sensing_range);
  Matrix A = params.no_fusion ? Matrix(rows.slot_ids.size(), rows.slot_ids.size())
                              : build_adjacency(state, rows.slot_ids, params.sensing_range);
  return pad(rows.X, A, rows.mask, rows.slot_ids, params.n_max);
}

std::ptrdiff_t CompactObservation::slot_of(VehicleId id) const {
  return find_slot(slot_ids, slot_ids.size(), id);
}

Matrix CompactObservation::adjacency_matrix() const {
  const std::size_t n = n_real();
  Matrix A(n, n);
  for (std::size_t i = 0; i < n * n; ++i) A.values()[i] = adjacency[i];
  return A;
}

ObservationTensor CompactObservation::expand() const {
  return pad(X, adjacency_matrix(), mask, slot_ids, n_max);
}

CompactObservation CompactObservation::from(const ObservationTensor& obs) {
  CompactObservation c;
  const std::size_t n = obs.n_real;
  c.n_max = obs.n_max();
  c.X = Matrix(n, obs.X.cols());
  for (std::size_t i = 0; i < n; ++i)
    std::copy(obs.X.row(i).begin(), obs.X.row(i).end(), c.X.row(i).begin());
  c.adjacency.resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c.adjacency[i * n + j] = obs.A(i, j) != 0.0 ? 1 : 0;
  c.mask.assign(obs.mask.begin(), obs.mask.begin() + static_cast<std::ptrdiff_t>(n));
  c.slot_ids.assign(obs.slot_ids.begin(), obs.slot_ids.begin() + static_cast<std::ptrdiff_t>(n));
  return c;
}

}  // namespace gcq::obs
