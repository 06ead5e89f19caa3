#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cmj/rng.hpp"

namespace cmj {

struct InvalidParams : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FamilyKind { GeneralPA, MarySearch, MedianBST, Fragmentation, Homogeneous };

std::string to_string(FamilyKind kind);

/// Weight sequence w_0, w_1, ... driving a general preferential attachment
/// birth process (rate w_k while an individual has k children).
///
/// Two descriptor forms are accepted:
///   - an explicit prefix with a tail rule (zero after the prefix, or the
///     last prefix value repeated forever),
///   - the affine rule w_k = beta*k + rho with beta in {-1, 0, 1}.
/// For beta = -1 the sequence is clamped at zero, which requires rho to be
/// a positive integer so the closed-form transform stays exact.
struct WeightSeq {
  enum class Form { Explicit, Affine };
  enum class Tail { Zero, Const };

  Form form = Form::Explicit;
  std::vector<double> prefix;  // Explicit only
  Tail tail = Tail::Zero;      // Explicit only
  double beta = 0.0;           // Affine only
  double rho = 0.0;            // Affine only

  static WeightSeq explicit_prefix(std::vector<double> w, Tail tail = Tail::Zero);
  static WeightSeq affine(double beta, double rho);

  /// w_k; affine sequences are clamped at zero.
  double rate(std::uint64_t k) const;

  /// Infimum of theta for which the transform series is finite.
  double theta_min() const;

  std::string describe() const;
};

struct GeneralPAParams {
  WeightSeq weights;
};

struct MarySearchParams {
  int m = 2;
};

struct MedianBSTParams {
  int ell = 1;
};

/// Dislocation law for fragmentation: a random simplex vector
/// V = (V_1,...,V_b) with 0 <= V_i < 1 and sum V_i = 1.
///
/// Supported samplers keep the moments E[V_i^theta] computable:
///   UniformBinary  b = 2, V_1 uniform on (0,1).
///   Deterministic  a fixed split (v_1,...,v_b).
///   QuantileTable  b = 2, V_1 drawn by piecewise-linear inverse-CDF
///                  interpolation of a user-supplied quantile table; its
///                  moments are evaluated by adaptive quadrature.
///
/// Note on the uniform binary split: the simplex-moment formula gives
/// mu_hat(theta) = 2/(1+theta) (some texts quote (1+theta)^{-1} for this
/// example); both normalizations put the Malthusian parameter at 1, and the
/// sampler realizes the former, which is what this module reports.
struct Dislocation {
  enum class Form { UniformBinary, Deterministic, QuantileTable };

  Form form = Form::UniformBinary;
  std::vector<double> values;  // Deterministic masses, or quantile knots

  static Dislocation uniform_binary();
  static Dislocation deterministic(std::vector<double> masses);
  static Dislocation quantile_table(std::vector<double> knots);

  int b() const;

  /// sum_i E[V_i^theta], theta >= 0.
  double moment(double theta) const;
  /// d/dtheta of moment: sum_i E[V_i^theta ln V_i].
  double moment_dtheta(double theta) const;
  /// sum_i P(V_i >= x) for x in (0,1]; the birth-age kernel needs it.
  double count_ge(double x) const;

  void sample(Rng& rng, std::vector<double>& out) const;

  std::string describe() const;
};

struct FragmentationParams {
  int b = 2;
  Dislocation dislocation;
};

/// Normalized lifetime law Lambda(.)/b: a finite mixture of exponential and
/// deterministic components. The family multiplies back the total mass b.
struct LifetimeLaw {
  struct Component {
    enum class Form { Exponential, Deterministic };
    Form form = Form::Exponential;
    double param = 1.0;   // rate for Exponential, duration for Deterministic
    double weight = 1.0;  // mixture weight
  };

  std::vector<Component> components;

  static LifetimeLaw exponential(double rate);
  static LifetimeLaw deterministic(double duration);
  static LifetimeLaw mixture(std::vector<Component> comps);

  double mean() const;
  double sample(Rng& rng) const;
  double survival(double t) const;                 // P(lifetime > t)
  double integrated_survival(double t) const;      // int_0^t P(lifetime > s) ds
  /// E[(1 - e^{-theta * lifetime}) / theta], theta > 0.
  double one_minus_laplace_over_theta(double theta) const;
  /// d/dtheta of the above.
  double one_minus_laplace_over_theta_deriv(double theta) const;

  std::string describe() const;
};

struct HomogeneousParams {
  double b = 2.0;  // total mass of the lifetime measure; also the birth rate
  LifetimeLaw lifetime;
};

using FamilyParams = std::variant<GeneralPAParams, MarySearchParams, MedianBSTParams,
                                  FragmentationParams, HomogeneousParams>;

/// Immutable, validated description of one tree family. Safe to share across
/// concurrent simulations; cursors spawned from it hold a pointer back into
/// the model, so the model must outlive them.
class FamilyModel {
 public:
  FamilyKind kind() const { return kind_; }

  const GeneralPAParams& general_pa() const { return std::get<GeneralPAParams>(params_); }
  const MarySearchParams& mary_search() const { return std::get<MarySearchParams>(params_); }
  const MedianBSTParams& median_bst() const { return std::get<MedianBSTParams>(params_); }
  const FragmentationParams& fragmentation() const { return std::get<FragmentationParams>(params_); }
  const HomogeneousParams& homogeneous() const { return std::get<HomogeneousParams>(params_); }

  /// Infimum of theta for which laplace_mu is finite (domain is open at this
  /// endpoint except for Fragmentation, whose domain is [0, inf)).
  double theta_min() const;

  std::string describe() const;

 private:
  friend FamilyModel make_family(FamilyKind kind, FamilyParams params);
  FamilyModel(FamilyKind kind, FamilyParams params)
      : kind_(kind), params_(std::move(params)) {}

  FamilyKind kind_;
  FamilyParams params_;
};

/// Validates the parameter block and builds the immutable model.
/// Throws InvalidParams naming the violated constraint.
FamilyModel make_family(FamilyKind kind, FamilyParams params);

inline FamilyModel make_family(GeneralPAParams p) {
  return make_family(FamilyKind::GeneralPA, FamilyParams(std::move(p)));
}
inline FamilyModel make_family(MarySearchParams p) {
  return make_family(FamilyKind::MarySearch, FamilyParams(p));
}
inline FamilyModel make_family(MedianBSTParams p) {
  return make_family(FamilyKind::MedianBST, FamilyParams(p));
}
inline FamilyModel make_family(FragmentationParams p) {
  return make_family(FamilyKind::Fragmentation, FamilyParams(std::move(p)));
}
inline FamilyModel make_family(HomogeneousParams p) {
  return make_family(FamilyKind::Homogeneous, FamilyParams(std::move(p)));
}

/// One step of an individual's characteristic trajectory: at `age` the
/// characteristic jumps by `delta`.
struct CharJump {
  double age;
  double delta;
};

/// One i.i.d. copy of an individual's reproduction data: its birth offsets
/// (enumerated lazily, in nondecreasing order) and its characteristic
/// schedule (initial value plus finitely many jumps).
///
/// Draw order is fixed per family so runs are reproducible:
/// MarySearch draws Y_2..Y_{m-1} then X_1..X_m at spawn; MedianBST draws
/// Y_1..Y_{l+1} at spawn; Fragmentation draws V at spawn; GeneralPA and
/// Homogeneous draw one exponential per next_offset call.
class ReproductionCursor {
 public:
  /// Next birth age, or nullopt once reproduction is exhausted.
  /// Offsets are nondecreasing; for Homogeneous none exceeds the lifetime.
  std::optional<double> next_offset(Rng& rng);

  double char_initial() const { return char_init_; }
  const std::vector<CharJump>& char_jumps() const { return jumps_; }
  /// Moves the jump schedule out (the engine schedules it once).
  std::vector<CharJump> take_char_jumps() { return std::move(jumps_); }

  /// Lifetime sampled at spawn (Homogeneous only; +inf otherwise).
  double lifetime() const { return limit_; }

 private:
  friend ReproductionCursor spawn_cursor(const FamilyModel& family, Rng& rng);

  enum class Prod : std::uint8_t { LazyBirth, PoissonLife, TwinAt, Presampled };

  Prod prod_ = Prod::Presampled;
  std::uint32_t k_ = 0;  // weight index / presample index / twins emitted
  double acc_ = 0.0;     // accumulated age (lazy forms) or twin age
  double rate_ = 0.0;    // Poisson birth rate (PoissonLife)
  double limit_ = std::numeric_limits<double>::infinity();  // lifetime bound
  const WeightSeq* weights_ = nullptr;                      // LazyBirth
  std::vector<double> offsets_;                             // Presampled, sorted
  double char_init_ = 1.0;
  std::vector<CharJump> jumps_;
};

/// Samples one i.i.d. copy of (birth process, lifetime, characteristic).
ReproductionCursor spawn_cursor(const FamilyModel& family, Rng& rng);

/// Laplace transform mu_hat(theta) of the reproduction intensity measure.
/// Throws DomainError outside the family's domain of finiteness.
double laplace_mu(const FamilyModel& family, double theta);

/// mu_hat'(theta) = -int t e^{-theta t} mu(dt), via per-family closed forms.
double laplace_mu_deriv(const FamilyModel& family, double theta);

/// E[phi_hat(theta)] for the family's canonical characteristic, theta > 0.
/// Families with phi == 1 return exactly 1.
double expected_phi_hat(const FamilyModel& family, double theta);

struct AssumptionCheck {
  enum class Status { Pass, Fail, Note };
  std::string id;
  Status status;
  std::string message;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  bool ok = true;        // no hard failures (notes allowed)
  double theta1 = 0.0;   // witness with 1 < mu_hat(theta1) < inf, if found
};

/// Per-family feasibility report: growth conditions, the theta1 witness
/// located by grid search, and characteristic moment conditions.
AssumptionReport check_assumptions(const FamilyModel& family);

/// Named models used across tests, the verification suite and the CLI.
namespace presets {
FamilyModel rrt();
FamilyModel bst();
FamilyModel binary_pyramid();
FamilyModel mary_increasing(int m);
FamilyModel mary_search(int m);
FamilyModel median_bst(int ell);
FamilyModel linear_pa(double beta, double rho);
FamilyModel fragmentation_uniform();
FamilyModel homogeneous_exp(double b, double rate);

/// The standard catalogue exercised by invariant checks.
std::vector<std::pair<std::string, FamilyModel>> catalogue();
}  // namespace presets

}  // namespace cmj
