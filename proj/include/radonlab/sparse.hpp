#pragma once
// Sparse domination: build the cube collection by recursive exceptional-set
// removal, verify the sparsity structure, evaluate the dominating form, and
// package the whole construction as a re-derivable certificate.

#include <algorithm>

#include "decomp.hpp"
#include "io.hpp"

namespace radonlab {

struct SparseEntry {
  DyadicCube Q;                  // global coordinates
  std::vector<int64_t> F_cells;  // sorted global flat indices, F_Q = Q \ E
  int depth = 0;
  double avg1 = 0;  // <|f1|>_{Q,p+}
  double avg2 = 0;  // <|f2|>_{3Q,q'+}
};

struct SparseCollection {
  GridSpec spec;
  std::vector<SparseEntry> entries;
};

struct BuildNode {
  int depth = 0;
  DyadicCube Q;  // global coordinates
  double D = 0;
  int64_t E_cells = 0;
  int whitney_cubes = 0;
  int children = 0;
  int pruned_zero = 0;
  int dropped_outside = 0;
  bool union_ok = true;
  bool windowed = false;
};

struct BuildTrace {
  std::vector<BuildNode> nodes;
  std::vector<DStep> root_D_steps;
  int max_depth = 0;
  bool all_union_ok = true;
};

enum class OperatorKind { singular, maximal };

inline std::string kind_name(OperatorKind k) {
  return k == OperatorKind::singular ? "singular" : "maximal";
}

namespace detail {

struct BuildContext {
  const GridSpec gglob;
  const DiscreteMeasure& mu;
  const DiscreteMeasure& sigma;
  const ExponentPair exps;
  int N1;
  int weight_exp;
  SparseCollection* col;
  BuildTrace* trace;
};

inline int64_t global_flat(const GridSpec& gg, std::array<int64_t, 2> offset,
                           const GridSpec& gl, int64_t local_flat) {
  auto c = gl.coords(local_flat);
  return gg.n == 1 ? gg.wrap(offset[0] + c[0])
                   : gg.wrap(offset[1] + c[1]) * gg.N + gg.wrap(offset[0] + c[0]);
}

// One recursion node.  f1 lives on Q0 and f2 on 3Q0, both on the local grid
// g; offset maps local cell (0,0) to a global cell.  eps has N2 == Q0.level.
inline void build_sparse_rec(BuildContext& ctx, const GridFunction& f1,
                             const GridFunction& f2, const EpsilonSigns& eps,
                             const DyadicCube& Q0, std::array<int64_t, 2> offset,
                             int depth) {
  const GridSpec& g = f1.spec;
  if (eps.N2 != Q0.level)
    throw guard_error("build_sparse: scale range must end at log2 l(Q0)");

  auto fields = exceptional_fields(f1, f2, ctx.sigma, ctx.exps, eps.N1, eps.N2, Q0);
  auto sel = select_D(fields, Q0);
  if (depth == 0) ctx.trace->root_D_steps = sel.trace;

  DyadicCube Qg{Q0.level,
                {ctx.gglob.wrap(offset[0] + Q0.corner[0]),
                 ctx.gglob.n == 2 ? ctx.gglob.wrap(offset[1] + Q0.corner[1]) : 0}};

  SparseEntry entry;
  entry.Q = Qg;
  entry.depth = depth;
  entry.avg1 = plus_average(f1, Q0, ctx.exps.p, ctx.weight_exp);
  entry.avg2 = plus_average(f2, dilate_box(g, Q0, 3), ctx.exps.q_prime(),
                            ctx.weight_exp);
  for (int64_t c : cells_of_cube(g, Q0))
    if (!sel.E.test(c))
      entry.F_cells.push_back(global_flat(ctx.gglob, offset, g, c));
  std::sort(entry.F_cells.begin(), entry.F_cells.end());
  ctx.col->entries.push_back(std::move(entry));

  BuildNode node;
  node.depth = depth;
  node.Q = Qg;
  node.D = sel.D;
  node.E_cells = sel.E.count;
  ctx.trace->max_depth = std::max(ctx.trace->max_depth, depth);

  auto cover = whitney(sel.E);
  node.whitney_cubes = int(cover.cubes.size());

  // Union audit: Q0 must be exactly F plus the kept Whitney cubes, and no
  // dropped cube may touch Q0 (dyadic nesting makes this automatic).
  std::vector<WhitneyCube> kept;
  std::vector<uint8_t> seen(size_t(g.cells()), 0);
  int64_t marked = 0;
  for (int64_t c : cells_of_cube(g, Q0))
    if (!sel.E.test(c)) {
      seen[size_t(c)] = 1;
      ++marked;
    }
  Box q0box = box_of(g, Q0);
  for (const auto& wc : cover.cubes) {
    bool inside = true;
    bool touches = false;
    for (int64_t c : cells_of_cube(g, wc.q)) {
      bool in = box_contains(g, q0box, g.coords(c));
      inside = inside && in;
      touches = touches || in;
    }
    if (inside) {
      kept.push_back(wc);
      for (int64_t c : cells_of_cube(g, wc.q)) {
        if (seen[size_t(c)]) node.union_ok = false;
        seen[size_t(c)] = 1;
        ++marked;
      }
    } else {
      ++node.dropped_outside;
      if (touches) node.union_ok = false;
    }
  }
  int64_t q0cells = int64_t(cells_of_cube(g, Q0).size());
  if (marked != q0cells) node.union_ok = false;
  for (int64_t c : cells_of_cube(g, Q0))
    if (!seen[size_t(c)]) node.union_ok = false;
  ctx.trace->all_union_ok = ctx.trace->all_union_ok && node.union_ok;

  std::sort(kept.begin(), kept.end(), [](const WhitneyCube& a, const WhitneyCube& b) {
    if (a.q.corner[0] != b.q.corner[0]) return a.q.corner[0] < b.q.corner[0];
    if (a.q.corner[1] != b.q.corner[1]) return a.q.corner[1] < b.q.corner[1];
    return a.q.level < b.q.level;
  });

  size_t node_slot = ctx.trace->nodes.size();
  ctx.trace->nodes.push_back(node);

  for (const auto& wc : kept) {
    const DyadicCube& Q = wc.q;
    if (Q.level >= Q0.level)
      throw std::logic_error("build_sparse: child does not shrink");
    if (Q.level < eps.N1) continue;  // null operator below this scale

    auto qcells = cells_of_cube(g, Q);
    bool f1_zero = true;
    for (int64_t c : qcells)
      if (f1.v[size_t(c)] != 0.0) {
        f1_zero = false;
        break;
      }
    Box q3 = dilate_box(g, Q, 3);
    bool f2_zero = true;
    for (int64_t c : cells_of_box(g, q3))
      if (f2.v[size_t(c)] != 0.0) {
        f2_zero = false;
        break;
      }
    if (f1_zero || f2_zero) {
      ++ctx.trace->nodes[node_slot].pruned_zero;
      continue;
    }

    EpsilonSigns ceps(eps.N1, Q.level,
                      std::vector<double>(eps.values.begin(),
                                          eps.values.begin() + (Q.level - eps.N1 + 1)));

    int tau = Q.level + g.s;
    int Kw = tau + 4;  // window of 16 cube sides
    int64_t side = side_cells(g, Q.level);
    ++ctx.trace->nodes[node_slot].children;

    if (Kw < g.K) {
      GridSpec gw = make_grid_unchecked(g.n, Kw, g.s);
      std::array<int64_t, 2> org{g.wrap(Q.corner[0] - 6 * side),
                                 g.n == 2 ? g.wrap(Q.corner[1] - 6 * side) : 0};
      GridFunction w1(gw), w2(gw);
      DyadicCube Qw{Q.level, {6 * side, g.n == 2 ? 6 * side : 0}};
      for (int64_t lc : cells_of_cube(gw, Qw)) {
        auto c = gw.coords(lc);
        int64_t gc = g.n == 1 ? g.wrap(org[0] + c[0])
                              : g.wrap(org[1] + c[1]) * g.N + g.wrap(org[0] + c[0]);
        w1.v[size_t(lc)] = f1.v[size_t(gc)];
      }
      for (int64_t lc : cells_of_box(gw, dilate_box(gw, Qw, 3))) {
        auto c = gw.coords(lc);
        int64_t gc = g.n == 1 ? g.wrap(org[0] + c[0])
                              : g.wrap(org[1] + c[1]) * g.N + g.wrap(org[0] + c[0]);
        w2.v[size_t(lc)] = f2.v[size_t(gc)];
      }
      std::array<int64_t, 2> off{ctx.gglob.wrap(offset[0] + org[0]),
                                 ctx.gglob.n == 2 ? ctx.gglob.wrap(offset[1] + org[1])
                                                  : 0};
      size_t child_slot = ctx.trace->nodes.size();
      build_sparse_rec(ctx, w1, w2, ceps, Qw, off, depth + 1);
      if (child_slot < ctx.trace->nodes.size())
        ctx.trace->nodes[child_slot].windowed = true;
    } else {
      GridFunction c1(g), c2(g);
      for (int64_t c : qcells) c1.v[size_t(c)] = f1.v[size_t(c)];
      for (int64_t c : cells_of_box(g, q3)) c2.v[size_t(c)] = f2.v[size_t(c)];
      build_sparse_rec(ctx, c1, c2, ceps, Q, offset, depth + 1);
    }
  }
}

}  // namespace detail

struct SparseBuildResult {
  SparseCollection col;
  BuildTrace trace;
};

// Build the sparse collection for T (or T*) paired against (f1, f2) on Q0.
// Requires eps supported on [N1, N2] with 2^{N2} = l(Q0), f1 supported in Q0
// and f2 in 3Q0.  Children recurse on Whitney cubes with truncated scale
// ranges; small children are re-solved on 16-side padded subwindows, which
// keeps the recursion near-linear in |Q0|.
inline SparseBuildResult build_sparse(const GridFunction& f1, const GridFunction& f2,
                                      const DiscreteMeasure& mu,
                                      const DiscreteMeasure& sigma,
                                      const EpsilonSigns& eps, const ExponentPair& exps,
                                      const DyadicCube& Q0, OperatorKind kind,
                                      int weight_exp = 4) {
  const GridSpec& g = f1.spec;
  if (!cube_aligned(g, Q0)) throw guard_error("build_sparse: Q0 not aligned");
  if (eps.N2 != Q0.level)
    throw guard_error("build_sparse: need 2^N2 = l(Q0)");
  if (kind == OperatorKind::singular && !mu.mean_zero)
    throw guard_error("build_sparse: singular kind needs mean-zero mu");
  if (kind == OperatorKind::maximal)
    for (double v : f2.v)
      if (v < 0.0) throw guard_error("build_sparse: maximal kind needs f2 >= 0");

  SparseBuildResult out;
  out.col.spec = g;
  detail::BuildContext ctx{g,       mu,       sigma,      exps,
                           eps.N1,  weight_exp, &out.col, &out.trace};
  detail::build_sparse_rec(ctx, f1, f2, eps, Q0, {0, 0}, 0);
  return out;
}

struct SparsityReport {
  bool pass = true;
  bool witness_inside = true;
  bool disjoint = true;
  bool half_measure = true;
  std::string first_violation;
};

inline SparsityReport verify_sparsity(const SparseCollection& col) {
  SparsityReport rep;
  const GridSpec& g = col.spec;
  std::vector<uint8_t> taken(size_t(g.cells()), 0);
  for (size_t e = 0; e < col.entries.size(); ++e) {
    const auto& ent = col.entries[e];
    Box qbox = box_of(g, ent.Q);
    int64_t qcount = g.n == 1 ? qbox.side : qbox.side * qbox.side;
    for (int64_t c : ent.F_cells) {
      if (!box_contains(g, qbox, g.coords(c))) {
        rep.witness_inside = false;
        if (rep.pass)
          rep.first_violation = "entry " + std::to_string(e) + ": F cell outside Q";
        rep.pass = false;
      }
      if (taken[size_t(c)]) {
        rep.disjoint = false;
        if (rep.pass)
          rep.first_violation = "entry " + std::to_string(e) + ": witness overlap";
        rep.pass = false;
      }
      taken[size_t(c)] = 1;
    }
    if (2 * int64_t(ent.F_cells.size()) < qcount) {
      rep.half_measure = false;
      if (rep.pass)
        rep.first_violation = "entry " + std::to_string(e) + ": |F| < |Q|/2";
      rep.pass = false;
    }
  }
  return rep;
}

// sum over cubes of |Q| <|f1|>_{Q,p+} <|f2|>_{3Q,q'+} with |Q| the physical
// volume (2^level per axis).
inline double evaluate_form(const SparseCollection& col, const GridFunction& f1,
                            const GridFunction& f2, const ExponentPair& exps,
                            int weight_exp = 4) {
  if (!(f1.spec == col.spec) || !(f2.spec == col.spec))
    throw guard_error("evaluate_form: grid mismatch");
  Accum total;
  for (const auto& ent : col.entries) {
    double a1 = plus_average(f1, ent.Q, exps.p, weight_exp);
    double a2 = plus_average(f2, dilate_box(col.spec, ent.Q, 3), exps.q_prime(),
                             weight_exp);
    total.add(cube_volume(col.spec, ent.Q) * a1 * a2);
  }
  return total.value();
}

struct SparseCertificate {
  OperatorKind kind = OperatorKind::singular;
  ExponentPair exps;
  GridSpec grid;
  EpsilonSigns eps;
  int weight_exp = 4;
  SparseCollection col;
  BuildTrace trace;
  double pairing = 0;
  double form = 0;
  double ratio = 0;
  bool sparsity_ok = false;
  bool union_ok = false;
};

// Full pipeline: build, verify structure, evaluate pairing and form.
inline SparseCertificate certify_bound(const GridFunction& f1, const GridFunction& f2,
                                       const DiscreteMeasure& mu,
                                       const DiscreteMeasure& sigma,
                                       const EpsilonSigns& eps,
                                       const ExponentPair& exps, const DyadicCube& Q0,
                                       OperatorKind kind, int weight_exp = 4) {
  SparseCertificate cert;
  cert.kind = kind;
  cert.exps = exps;
  cert.grid = f1.spec;
  cert.eps = eps;
  cert.weight_exp = weight_exp;

  auto built = build_sparse(f1, f2, mu, sigma, eps, exps, Q0, kind, weight_exp);
  cert.col = std::move(built.col);
  cert.trace = std::move(built.trace);
  cert.union_ok = cert.trace.all_union_ok;

  auto rep = verify_sparsity(cert.col);
  cert.sparsity_ok = rep.pass;
  if (!rep.pass)
    throw std::logic_error("certify_bound: sparsity verification failed: " +
                           rep.first_violation);

  GridFunction Tf = kind == OperatorKind::singular
                        ? radon_T(f1, mu, eps)
                        : maximal_T_star(f1, sigma, eps.N1, eps.N2);
  cert.pairing = std::fabs(pairing(Tf, f2));
  cert.form = evaluate_form(cert.col, f1, f2, exps, weight_exp);
  cert.ratio = cert.form > 0.0 ? cert.pairing / cert.form : 0.0;
  if (!(cert.form > 0.0) && cert.pairing > 1e-10)
    throw std::logic_error("certify_bound: zero form against nonzero pairing");
  return cert;
}

inline json certificate_to_json(const SparseCertificate& cert) {
  json cubes = json::array();
  for (const auto& ent : cert.col.entries) {
    json c{{"level", ent.Q.level},
           {"corner", json::array({ent.Q.corner[0], ent.Q.corner[1]})},
           {"depth", ent.depth},
           {"F_RLE", rle_encode(ent.F_cells)},
           {"avg1", ent.avg1},
           {"avg2", ent.avg2}};
    cubes.push_back(std::move(c));
  }
  json dtrace = json::array();
  for (const auto& nd : cert.trace.nodes)
    dtrace.push_back(json{{"depth", nd.depth},
                          {"level", nd.Q.level},
                          {"corner", json::array({nd.Q.corner[0], nd.Q.corner[1]})},
                          {"D", nd.D},
                          {"E_cells", nd.E_cells},
                          {"whitney_cubes", nd.whitney_cubes},
                          {"children", nd.children},
                          {"pruned_zero", nd.pruned_zero},
                          {"dropped_outside", nd.dropped_outside},
                          {"windowed", nd.windowed}});
  json root_steps = json::array();
  for (const auto& st : cert.trace.root_D_steps)
    root_steps.push_back(
        json{{"D", st.D}, {"E_cells", st.E_count}, {"inside_6Q0", st.inside_6Q0}});
  return json{{"version", 1},
              {"kind", kind_name(cert.kind)},
              {"p", cert.exps.p},
              {"q", cert.exps.q},
              {"slice_weight_exponent", cert.weight_exp},
              {"grid", {{"n", cert.grid.n}, {"K", cert.grid.K}, {"s", cert.grid.s}}},
              {"epsilon",
               {{"N1", cert.eps.N1}, {"N2", cert.eps.N2}, {"values", cert.eps.values}}},
              {"D_trace", dtrace},
              {"root_D_steps", root_steps},
              {"max_depth", cert.trace.max_depth},
              {"cubes", cubes},
              {"pairing", cert.pairing},
              {"form", cert.form},
              {"ratio", cert.ratio},
              {"checks", {{"sparsity", cert.sparsity_ok}, {"union", cert.union_ok}}}};
}

// Serialized problem instance consumed by the offline re-verifier.
inline json sparse_inputs_json(const GridFunction& f1, const GridFunction& f2,
                               const DiscreteMeasure& mu, const DiscreteMeasure& sigma,
                               const EpsilonSigns& eps, const ExponentPair& exps,
                               const DyadicCube& Q0, OperatorKind kind,
                               int weight_exp) {
  return json{
      {"grid", {{"n", f1.spec.n}, {"K", f1.spec.K}, {"s", f1.spec.s}}},
      {"kind", kind_name(kind)},
      {"p", exps.p},
      {"q", exps.q},
      {"slice_weight_exponent", weight_exp},
      {"Q0", {{"level", Q0.level}, {"corner", json::array({Q0.corner[0], Q0.corner[1]})}}},
      {"epsilon", {{"N1", eps.N1}, {"N2", eps.N2}, {"values", eps.values}}},
      {"mu", mu},
      {"sigma", sigma},
      {"f1", f1.v},
      {"f2", f2.v}};
}

struct ReverifyReport {
  bool pass = false;
  bool structure_match = false;
  bool sparsity_ok = false;
  bool union_ok = false;
  double pairing_rel = 0;
  double form_rel = 0;
  double ratio_rel = 0;
  std::string detail;
};

namespace detail {
inline double rel_gap(double a, double b) {
  double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
  return std::fabs(a - b) / scale;
}
}  // namespace detail

// Re-derive the whole certificate from the serialized inputs and compare:
// the cube/witness structure must match exactly, the recomputed pairing and
// form must agree to 1e-8 relative, and the structural checks must re-pass.
inline ReverifyReport reverify(const json& cert_j, const json& inputs_j) {
  ReverifyReport rep;
  GridSpec g = detail::make_grid_unchecked(inputs_j.at("grid").at("n").get<int>(),
                                   inputs_j.at("grid").at("K").get<int>(),
                                   inputs_j.at("grid").at("s").get<int>());
  GridFunction f1(g), f2(g);
  f1.v = inputs_j.at("f1").get<std::vector<double>>();
  f2.v = inputs_j.at("f2").get<std::vector<double>>();
  if (int64_t(f1.v.size()) != g.cells() || int64_t(f2.v.size()) != g.cells()) {
    rep.detail = "input sample count does not match grid";
    return rep;
  }
  DiscreteMeasure mu = inputs_j.at("mu").get<DiscreteMeasure>();
  DiscreteMeasure sigma = inputs_j.at("sigma").get<DiscreteMeasure>();
  const auto& ej = inputs_j.at("epsilon");
  EpsilonSigns eps(ej.at("N1").get<int>(), ej.at("N2").get<int>(),
                   ej.at("values").get<std::vector<double>>());
  ExponentPair exps(inputs_j.at("p").get<double>(), inputs_j.at("q").get<double>());
  OperatorKind kind = inputs_j.at("kind").get<std::string>() == "maximal"
                          ? OperatorKind::maximal
                          : OperatorKind::singular;
  int weight_exp = inputs_j.at("slice_weight_exponent").get<int>();
  DyadicCube Q0{inputs_j.at("Q0").at("level").get<int>(),
                {inputs_j.at("Q0").at("corner").at(0).get<int64_t>(),
                 inputs_j.at("Q0").at("corner").at(1).get<int64_t>()}};

  SparseCertificate redo =
      certify_bound(f1, f2, mu, sigma, eps, exps, Q0, kind, weight_exp);
  json redo_j = certificate_to_json(redo);

  rep.sparsity_ok = redo.sparsity_ok;
  rep.union_ok = redo.union_ok;
  rep.structure_match = redo_j.at("cubes") == cert_j.at("cubes") &&
                        redo_j.at("D_trace") == cert_j.at("D_trace") &&
                        redo_j.at("epsilon") == cert_j.at("epsilon") &&
                        redo_j.at("grid") == cert_j.at("grid") &&
                        redo_j.at("kind") == cert_j.at("kind");
  if (!rep.structure_match) rep.detail = "re-derived structure differs";
  rep.pairing_rel =
      detail::rel_gap(redo.pairing, cert_j.at("pairing").get<double>());
  rep.form_rel = detail::rel_gap(redo.form, cert_j.at("form").get<double>());
  rep.ratio_rel = detail::rel_gap(redo.ratio, cert_j.at("ratio").get<double>());
  rep.pass = rep.structure_match && rep.sparsity_ok && rep.union_ok &&
             rep.pairing_rel <= 1e-8 && rep.form_rel <= 1e-8 &&
             rep.ratio_rel <= 1e-8;
  return rep;
}

}  // namespace radonlab
