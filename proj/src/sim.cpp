#include "cmj/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>

namespace cmj {

namespace {

struct Event {
  double time;
  std::uint64_t seq;   // strictly increasing insertion counter; FIFO among ties
  std::uint32_t node;  // Birth: parent id; CharJump: owning node id
  float delta;         // CharJump only
  bool is_birth;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

using EventQueue = std::priority_queue<Event, std::vector<Event>, EventLater>;

struct Engine {
  const FamilyModel& family;
  const double n;
  const double p;
  Rng& rng;
  const SimOptions& opt;

  EventQueue queue;
  std::uint64_t seq = 0;
  double clock = 0.0;

  std::vector<double> sigma;
  std::vector<ReproductionCursor> cursors;
  std::vector<std::uint8_t> in_cluster;
  std::vector<std::uint32_t> cluster_root;

  double z_phi = 0.0;
  std::int64_t root_cluster = 0;
  std::int64_t n_mutants = 0;

  SimOutcome out;

  Engine(const FamilyModel& f, double n_, double p_, Rng& r, const SimOptions& o)
      : family(f), n(n_), p(p_), rng(r), opt(o) {}

  void reset() {
    queue = EventQueue();
    seq = 0;
    clock = 0.0;
    sigma.clear();
    cursors.clear();
    in_cluster.clear();
    cluster_root.clear();
    z_phi = 0.0;
    root_cluster = 0;
    n_mutants = 0;
    if (opt.mode == SimMode::Full) {
      out.tree.emplace();
      if (opt.record_weight_log) out.weight_log.emplace();
    }
  }

  void add_weight(double t, double delta) {
    z_phi += delta;
    if (out.weight_log) out.weight_log->emplace_back(t, delta);
  }

  void create_node(std::uint32_t parent, double t) {
    if (sigma.size() >= opt.node_cap)
      throw CapExceeded("simulate: node cap of " + std::to_string(opt.node_cap) +
                        " exceeded for " + family.describe());
    const auto id = static_cast<std::uint32_t>(sigma.size());
    const bool is_root = parent == kNoParent;
    const bool clone = is_root ? true : rng.bernoulli(p);
    const bool in_c = is_root ? true : (in_cluster[parent] != 0 && clone);

    sigma.push_back(t);
    in_cluster.push_back(in_c ? 1 : 0);
    if (opt.record_cluster_sizes)
      cluster_root.push_back(is_root ? id : (clone ? cluster_root[parent] : id));
    if (in_c) ++root_cluster;
    if (!is_root && !clone) ++n_mutants;
    if (out.tree) out.tree->push_back({parent, t, clone, in_c});

    ReproductionCursor cur = spawn_cursor(family, rng);
    add_weight(t, cur.char_initial());
    for (const CharJump& j : cur.take_char_jumps())
      queue.push({t + j.age, seq++, id, static_cast<float>(j.delta), false});
    if (auto off = cur.next_offset(rng))
      queue.push({t + *off, seq++, id, 0.0f, true});
    cursors.push_back(std::move(cur));

    if (!is_root) {
      if (auto off = cursors[parent].next_offset(rng))
        queue.push({sigma[parent] + *off, seq++, parent, 0.0f, true});
    }
  }

  // Runs events until the stop rule fires. Returns false when the population
  // dies out before reaching the weight threshold.
  bool run() {
    create_node(kNoParent, 0.0);
    if (!opt.stop_at_time && z_phi >= n) {
      out.tau = 0.0;
      return true;
    }
    while (!queue.empty()) {
      const double t = queue.top().time;
      if (t < clock) throw std::logic_error("simulate: event clock moved backwards");
      clock = t;
      if (opt.stop_at_time && t > *opt.stop_at_time) {
        out.tau = *opt.stop_at_time;
        return true;
      }
      do {
        const Event ev = queue.top();
        queue.pop();
        if (ev.is_birth)
          create_node(ev.node, t);
        else
          add_weight(t, ev.delta);
      } while (!queue.empty() && queue.top().time == t);
      if (!opt.stop_at_time && z_phi >= n) {
        out.tau = t;
        return true;
      }
    }
    if (opt.stop_at_time) {
      out.tau = *opt.stop_at_time;  // population stopped growing early
      return true;
    }
    return false;
  }

  SimOutcome finish() {
    out.z_total = static_cast<std::int64_t>(sigma.size());
    out.z_phi = z_phi;
    out.root_cluster = root_cluster;
    out.n_mutants = n_mutants;
    if (opt.record_cluster_sizes) {
      std::vector<std::uint32_t> roots = cluster_root;
      std::sort(roots.begin(), roots.end());
      std::vector<std::int64_t> sizes;
      for (std::size_t i = 0; i < roots.size();) {
        std::size_t j = i;
        while (j < roots.size() && roots[j] == roots[i]) ++j;
        sizes.push_back(static_cast<std::int64_t>(j - i));
        i = j;
      }
      std::sort(sizes.rbegin(), sizes.rend());
      out.cluster_sizes = std::move(sizes);
    }
    return std::move(out);
  }
};

}  // namespace

SimOutcome simulate(const FamilyModel& family, double n, double p, Rng& rng,
                    const SimOptions& options) {
  if (!options.stop_at_time && !(n >= 1.0))
    throw InvalidParams("simulate: weight threshold n must be at least 1");
  if (options.stop_at_time && !(*options.stop_at_time >= 0.0))
    throw InvalidParams("simulate: stop time must be nonnegative");
  if (!(p > 0.0) || p > 1.0) throw InvalidParams("simulate: p must lie in (0, 1]");

  Engine eng(family, n, p, rng, options);
  std::int64_t retries = 0;
  for (;;) {
    eng.reset();
    if (eng.run()) break;
    // The queue drained with the threshold unreached: extinction. Only
    // Homogeneous families can die out; a restart realizes the conditioning
    // on survival up to the stopping time.
    if (family.kind() != FamilyKind::Homogeneous)
      throw std::logic_error("simulate: unexpected extinction for " + family.describe());
    if (++retries > options.retry_limit)
      throw NonTerminating("simulate: exceeded " + std::to_string(options.retry_limit) +
                           " extinction restarts for " + family.describe());
  }
  eng.out.retries = retries;
  return eng.finish();
}

double root_cluster_fraction(const SimOutcome& outcome, double n) {
  return static_cast<double>(outcome.root_cluster) / n;
}

std::string export_tree(const SimOutcome& outcome, TreeFormat format) {
  (void)format;  // only CSV is defined
  if (!outcome.tree)
    throw NotRecorded("export_tree: run used streaming mode; no tree recorded");
  std::string s = "child_id,parent_id,sigma,is_clone\n";
  char buf[96];
  for (std::size_t id = 0; id < outcome.tree->size(); ++id) {
    const TreeNode& nd = (*outcome.tree)[id];
    if (nd.parent == kNoParent)
      std::snprintf(buf, sizeof(buf), "%zu,,%.17g,%d\n", id, nd.sigma, nd.is_clone ? 1 : 0);
    else
      std::snprintf(buf, sizeof(buf), "%zu,%u,%.17g,%d\n", id, nd.parent, nd.sigma,
                    nd.is_clone ? 1 : 0);
    s += buf;
  }
  return s;
}

}  // namespace cmj
