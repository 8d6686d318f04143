// ============================================================================
// blocks.cpp — lifting helpers and the power-system block library.
// ============================================================================
#include "mlstab/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "mlstab/model_io.hpp"

namespace mlstab {

namespace {

using Term = EquationBuilder::Term;

constexpr double kPi = std::numbers::pi_v<double>;

/// Field table driving the JSON round trip of BlockParams.
struct ParamField {
  const char* name;
  double BlockParams::*member;
};

const ParamField kParamFields[] = {
    {"s_b", &BlockParams::s_b},
    {"v_ll", &BlockParams::v_ll},
    {"f_0", &BlockParams::f_0},
    {"omega_b", &BlockParams::omega_b},
    {"scr", &BlockParams::scr},
    {"x_over_r", &BlockParams::x_over_r},
    {"v_peak", &BlockParams::v_peak},
    {"r_g", &BlockParams::r_g},
    {"l_g", &BlockParams::l_g},
    {"r_load", &BlockParams::r_load},
    {"p_load_pu", &BlockParams::p_load_pu},
    {"source_scale", &BlockParams::source_scale},
    {"r_f", &BlockParams::r_f},
    {"l_f", &BlockParams::l_f},
    {"h", &BlockParams::h},
    {"k_d", &BlockParams::k_d},
    {"omega_ref", &BlockParams::omega_ref},
    {"omega_f", &BlockParams::omega_f},
    {"k_q", &BlockParams::k_q},
    {"v_ref", &BlockParams::v_ref},
    {"r_v", &BlockParams::r_v},
    {"l_v", &BlockParams::l_v},
    {"k_p_cc", &BlockParams::k_p_cc},
    {"k_i_cc", &BlockParams::k_i_cc},
    {"k_p_pll", &BlockParams::k_p_pll},
    {"k_i_pll", &BlockParams::k_i_pll},
    {"k_p_pq", &BlockParams::k_p_pq},
    {"k_i_pq", &BlockParams::k_i_pq},
    {"k_p", &BlockParams::k_p},
    {"k_i", &BlockParams::k_i},
    {"r_kl", &BlockParams::r_kl},
    {"l_kl", &BlockParams::l_kl},
    {"omega_g", &BlockParams::omega_g},
    {"p_ref", &BlockParams::p_ref},
    {"q_ref", &BlockParams::q_ref},
};

}  // namespace

// ============================================================================
// Parameters
// ============================================================================

BlockParams default_params() {
  BlockParams p;
  p.omega_b = 2.0 * kPi * p.f_0;
  p.v_peak = p.v_ll * std::sqrt(2.0 / 3.0);
  const double z_b = p.v_ll * p.v_ll / p.s_b;
  p.r_f = 0.02 * z_b;
  p.l_f = 0.07 * z_b / p.omega_b;
  const double z_th = z_b / p.scr;
  p.r_g = z_th / std::sqrt(1.0 + p.x_over_r * p.x_over_r);
  p.l_g = p.x_over_r * p.r_g / p.omega_b;
  p.r_load = p.v_ll * p.v_ll / (p.p_load_pu * p.s_b);
  p.v_ref = p.v_peak;
  p.r_kl = p.r_g;
  p.l_kl = p.l_g;
  p.omega_g = p.omega_b;
  return p;
}

std::string params_to_json(const BlockParams& params) {
  nlohmann::json j;
  for (const ParamField& f : kParamFields) j[f.name] = params.*(f.member);
  return j.dump(2) + "\n";
}

BlockParams params_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw std::invalid_argument("parameter file is not valid JSON");
  if (!j.is_object())
    throw std::invalid_argument("parameter file must be a JSON object");
  BlockParams p = default_params();
  for (const auto& [key, value] : j.items()) {
    const auto* found = std::find_if(
        std::begin(kParamFields), std::end(kParamFields),
        [&key](const ParamField& f) { return key == f.name; });
    if (found == std::end(kParamFields))
      throw std::invalid_argument("unknown parameter '" + key + "'");
    if (!value.is_number())
      throw std::invalid_argument("parameter '" + key + "' must be a number");
    p.*(found->member) = value.get<double>();
    if (!std::isfinite(p.*(found->member)))
      throw std::invalid_argument("parameter '" + key + "' must be finite");
  }
  return p;
}

BlockParams load_params(const std::string& path) {
  return params_from_json(read_text_file(path));
}

// ============================================================================
// Lifting helpers
// ============================================================================

Cpn1Model lift_polynomial(
    const std::vector<std::pair<std::string, int>>& powers) {
  if (powers.empty())
    throw std::invalid_argument("lift_polynomial: empty monomial spec");
  for (const auto& [name, power] : powers)
    if (power < 0)
      throw std::invalid_argument("lift_polynomial: negative power for '" +
                                  name + "'");
  if (powers.front().second < 1)
    throw std::invalid_argument(
        "lift_polynomial: the leading variable must appear with power >= 1");

  EquationBuilder b;
  for (const auto& [name, power] : powers) {
    (void)power;
    b.add_state(name);
  }

  // Copies make repeated factors multilinear: x^d -> x * copies(d-1).
  std::vector<std::string> product;
  std::vector<std::pair<std::string, std::string>> copies;  // (source, copy)
  for (const auto& [name, power] : powers) {
    if (power == 0) continue;
    product.push_back(name);
    for (int k = 1; k < power; ++k) {
      const std::string copy = name + "_copy" + std::to_string(k);
      b.add_algebraic(copy);
      copies.emplace_back(name, copy);
      product.push_back(copy);
    }
  }

  const std::string& x1 = powers.front().first;
  b.add_equation("lift." + x1 + ".dyn",
                 {Term{1.0, {x1 + "_dot"}, {}}, Term{-1.0, product, {}}});
  int k = 0;
  for (const auto& [source, copy] : copies)
    b.add_equation("lift.copy" + std::to_string(++k),
                   {Term{1.0, {source}, {}}, Term{-1.0, {copy}, {}}});
  return b.build();
}

Cpn1Model lift_trig(const TrigLift& lift,
                    const std::vector<EquationBuilder::Term>& rate) {
  if (lift.cos_name.empty() || lift.sin_name.empty())
    throw std::invalid_argument("lift_trig: lift state names must be set");
  if (rate.empty())
    throw std::invalid_argument("lift_trig: empty rate expression");

  bool touches_lift = false;
  for (const Term& t : rate) {
    std::vector<std::string> sorted = t.signals;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end())
      throw std::invalid_argument(
          "lift_trig: rate term repeats signal '" + *dup +
          "'; the product is not multilinear");
    for (const std::string& s : t.signals)
      if (s == lift.cos_name || s == lift.sin_name) touches_lift = true;
  }

  EquationBuilder b;
  b.add_state(lift.cos_name);
  b.add_state(lift.sin_name);
  std::vector<std::string> registered{lift.cos_name, lift.sin_name};
  for (const Term& t : rate)
    for (const std::string& s : t.signals) {
      if (std::find(registered.begin(), registered.end(), s) !=
          registered.end())
        continue;
      b.add_input(s);
      registered.push_back(s);
    }

  // Multiplying the rate by the opposite lift state would repeat a lift
  // signal whenever the rate itself contains one; copies restore
  // multilinearity exactly as in the lifted PLL.
  std::string mult_cos = lift.cos_name;
  std::string mult_sin = lift.sin_name;
  if (touches_lift) {
    mult_cos = lift.cos_name + "_copy";
    mult_sin = lift.sin_name + "_copy";
    b.add_algebraic(mult_cos);
    b.add_algebraic(mult_sin);
  }

  std::vector<Term> eq_cos{Term{1.0, {lift.cos_name + "_dot"}, {}}};
  std::vector<Term> eq_sin{Term{1.0, {lift.sin_name + "_dot"}, {}}};
  for (const Term& t : rate) {
    Term tc = t;
    tc.signals.push_back(mult_sin);
    eq_cos.push_back(std::move(tc));
    Term ts = t;
    ts.coeff = -ts.coeff;
    ts.signals.push_back(mult_cos);
    eq_sin.push_back(std::move(ts));
  }
  b.add_equation("lift." + lift.cos_name, std::move(eq_cos));
  b.add_equation("lift." + lift.sin_name, std::move(eq_sin));
  if (touches_lift) {
    b.add_equation("lift." + mult_cos,
                   {Term{1.0, {mult_cos}, {}}, Term{-1.0, {lift.cos_name}, {}}});
    b.add_equation("lift." + mult_sin,
                   {Term{1.0, {mult_sin}, {}}, Term{-1.0, {lift.sin_name}, {}}});
  }
  b.add_lift(lift.cos_name, lift.sin_name);
  return b.build();
}

Cpn1Model rotation_block(const TrigLift& local, const TrigLift& global_frame) {
  if (local.cos_name.empty() || global_frame.cos_name.empty())
    throw std::invalid_argument("rotation_block: lift state names must be set");
  EquationBuilder b;
  for (const std::string& s :
       {local.cos_name, local.sin_name, global_frame.cos_name,
        global_frame.sin_name, std::string("v_D"), std::string("v_Q")})
    b.add_input(s);
  for (const char* s : {"h1", "h2", "v_d", "v_q"}) b.add_algebraic(s);

  b.add_equation("rot.h1",
                 {Term{-1.0, {"h1"}, {}},
                  Term{1.0, {local.cos_name, global_frame.cos_name}, {}},
                  Term{1.0, {local.sin_name, global_frame.sin_name}, {}}});
  b.add_equation("rot.h2",
                 {Term{-1.0, {"h2"}, {}},
                  Term{1.0, {local.sin_name, global_frame.cos_name}, {}},
                  Term{-1.0, {local.cos_name, global_frame.sin_name}, {}}});
  b.add_equation("rot.d", {Term{-1.0, {"v_d"}, {}}, Term{1.0, {"h1", "v_D"}, {}},
                           Term{1.0, {"h2", "v_Q"}, {}}});
  b.add_equation("rot.q", {Term{-1.0, {"v_q"}, {}}, Term{-1.0, {"h2", "v_D"}, {}},
                           Term{1.0, {"h1", "v_Q"}, {}}});
  return b.build();
}

// ============================================================================
// Power-system component library
// ============================================================================

Cpn1Model pll_block(const BlockParams& params) {
  if (params.k_p < 0.0 || params.k_i < 0.0)
    throw std::invalid_argument("pll_block: gains must be nonnegative");
  const double kp = params.k_p;
  const double ki = params.k_i;

  EquationBuilder b;
  b.add_state("z1");
  b.add_state("z2");
  b.add_state("z3");
  b.add_input("u1");
  b.add_input("u2");
  b.add_algebraic("alpha1");
  b.add_algebraic("alpha2");
  b.add_lift("z1", "z2");

  b.add_equation("pll.z1", {Term{1.0, {"z1_dot"}, {}},
                            Term{1.0, {"z3", "alpha2"}, {}},
                            Term{-kp, {"u1", "z2", "alpha2"}, {}},
                            Term{-kp, {"u2", "z1", "alpha2"}, {}}});
  b.add_equation("pll.z2", {Term{1.0, {"z2_dot"}, {}},
                            Term{-1.0, {"z3", "alpha1"}, {}},
                            Term{kp, {"u1", "z2", "alpha1"}, {}},
                            Term{kp, {"u2", "z1", "alpha1"}, {}}});
  b.add_equation("pll.z3", {Term{1.0, {"z3_dot"}, {}},
                            Term{ki, {"u1", "z2"}, {}},
                            Term{ki, {"u2", "z1"}, {}}});
  b.add_equation("pll.copy1", {Term{1.0, {"alpha1"}, {}}, Term{-1.0, {"z1"}, {}}});
  b.add_equation("pll.copy2", {Term{1.0, {"alpha2"}, {}}, Term{-1.0, {"z2"}, {}}});
  return b.build();
}

Cpn1Model vsm_block(const BlockParams& params, double omega_frame) {
  if (params.h <= 0.0)
    throw std::invalid_argument("vsm_block: inertia constant h must be positive");
  const double wb = params.omega_b;

  EquationBuilder b;
  b.add_state("omega_vsm");
  b.add_state("theta_vsm");
  b.add_state("z_cos_vsm");
  b.add_state("z_sin_vsm");
  b.add_input("p");
  b.add_input("p_ref");
  b.add_input("omega_ref");
  b.add_lift("z_cos_vsm", "z_sin_vsm");

  b.add_equation("vsm.swing",
                 {Term{-2.0 * params.h, {"omega_vsm_dot"}, {}},
                  Term{1.0, {"p_ref"}, {}},
                  Term{-1.0 / params.s_b, {"p"}, {}},
                  Term{params.k_d, {"omega_vsm"}, {}},
                  Term{-params.k_d, {"omega_ref"}, {}}});

  std::vector<Term> theta{Term{-1.0, {"theta_vsm_dot"}, {}},
                          Term{wb, {"omega_vsm"}, {}}};
  std::vector<Term> lift_cos{Term{-1.0, {"z_cos_vsm_dot"}, {}},
                             Term{-wb, {"omega_vsm", "z_sin_vsm"}, {}}};
  std::vector<Term> lift_sin{Term{-1.0, {"z_sin_vsm_dot"}, {}},
                             Term{wb, {"omega_vsm", "z_cos_vsm"}, {}}};
  if (omega_frame != 0.0) {
    theta.push_back(Term{-wb * omega_frame, {}, {}});
    lift_cos.push_back(Term{wb * omega_frame, {"z_sin_vsm"}, {}});
    lift_sin.push_back(Term{-wb * omega_frame, {"z_cos_vsm"}, {}});
  }
  b.add_equation("vsm.theta", std::move(theta));
  b.add_equation("vsm.lift_cos", std::move(lift_cos));
  b.add_equation("vsm.lift_sin", std::move(lift_sin));
  return b.build();
}

Cpn1Model droop_q_block(const BlockParams& params) {
  if (params.omega_f < 0.0)
    throw std::invalid_argument("droop_q_block: omega_f must be nonnegative");
  if (params.k_q < 0.0)
    throw std::invalid_argument("droop_q_block: k_q must be nonnegative");

  EquationBuilder b;
  b.add_state("x_qfilt");
  b.add_input("q");
  b.add_input("q_ref");
  b.add_output("v_d_star");

  b.add_equation("droop.filter", {Term{-1.0, {"x_qfilt_dot"}, {}},
                                  Term{params.omega_f, {"q"}, {}},
                                  Term{-params.omega_f, {"x_qfilt"}, {}}});
  b.add_equation("droop.vref", {Term{-1.0, {"v_d_star"}, {}},
                                Term{params.v_ref, {}, {}},
                                Term{-params.k_q, {"x_qfilt"}, {}},
                                Term{params.k_q, {"q_ref"}, {}}});
  return b.build();
}

Cpn1Model virtual_admittance_block(const BlockParams& params) {
  if (params.l_v <= 0.0)
    throw std::invalid_argument("virtual_admittance_block: nonpositive l_v");
  if (params.r_v < 0.0)
    throw std::invalid_argument("virtual_admittance_block: negative r_v");
  const double a = params.r_v / params.l_v;
  const double wb = params.omega_b;

  EquationBuilder b;
  b.add_state("x_va_d");
  b.add_state("x_va_q");
  b.add_input("v_ref_d");
  b.add_input("v_ref_q");
  b.add_output("i_star_d");
  b.add_output("i_star_q");

  b.add_equation("va.d", {Term{-1.0, {"x_va_d_dot"}, {}},
                          Term{-a, {"x_va_d"}, {}},
                          Term{-wb, {"x_va_q"}, {}},
                          Term{1.0, {"v_ref_d"}, {}}});
  b.add_equation("va.q", {Term{-1.0, {"x_va_q_dot"}, {}},
                          Term{-a, {"x_va_q"}, {}},
                          Term{wb, {"x_va_d"}, {}},
                          Term{1.0, {"v_ref_q"}, {}}});
  b.add_equation("va.out_d", {Term{-1.0, {"i_star_d"}, {}},
                              Term{1.0 / params.l_v, {"x_va_d"}, {}}});
  b.add_equation("va.out_q", {Term{-1.0, {"i_star_q"}, {}},
                              Term{1.0 / params.l_v, {"x_va_q"}, {}}});
  return b.build();
}

Cpn1Model current_control_block(const BlockParams& params) {
  if (params.k_p_cc < 0.0 || params.k_i_cc < 0.0)
    throw std::invalid_argument("current_control_block: negative gains");
  const double kp = params.k_p_cc;
  const double ki = params.k_i_cc;
  const double lw = params.l_f * params.omega_b;

  EquationBuilder b;
  b.add_state("x_i_d");
  b.add_state("x_i_q");
  for (const char* s :
       {"i_ref_d", "i_ref_q", "i_d", "i_q", "omega", "v_d", "v_q"})
    b.add_input(s);
  b.add_output("v_out_d");
  b.add_output("v_out_q");

  b.add_equation("cc.int_d", {Term{-1.0, {"x_i_d_dot"}, {}},
                              Term{ki, {"i_ref_d"}, {}},
                              Term{-ki, {"i_d"}, {}}});
  b.add_equation("cc.int_q", {Term{-1.0, {"x_i_q_dot"}, {}},
                              Term{ki, {"i_ref_q"}, {}},
                              Term{-ki, {"i_q"}, {}}});
  b.add_equation("cc.out_d", {Term{-1.0, {"v_out_d"}, {}},
                              Term{kp, {"i_ref_d"}, {}},
                              Term{-kp, {"i_d"}, {}},
                              Term{ki, {"x_i_d"}, {}},
                              Term{-lw, {"omega", "i_q"}, {}},
                              Term{1.0, {"v_d"}, {}}});
  b.add_equation("cc.out_q", {Term{-1.0, {"v_out_q"}, {}},
                              Term{kp, {"i_ref_q"}, {}},
                              Term{-kp, {"i_q"}, {}},
                              Term{ki, {"x_i_q"}, {}},
                              Term{lw, {"omega", "i_d"}, {}},
                              Term{1.0, {"v_q"}, {}}});
  return b.build();
}

Cpn1Model rl_branch_block(const BlockParams& params) {
  if (params.r_kl <= 0.0 || params.l_kl <= 0.0)
    throw std::invalid_argument("rl_branch_block: r_kl and l_kl must be positive");
  const double a = params.r_kl / params.l_kl;
  const double inv_l = 1.0 / params.l_kl;

  EquationBuilder b;
  b.add_state("i_D");
  b.add_state("i_Q");
  for (const char* s : {"v_k_D", "v_k_Q", "v_l_D", "v_l_Q", "omega_g"})
    b.add_input(s);

  b.add_equation("rl.d", {Term{-1.0, {"i_D_dot"}, {}},
                          Term{-a, {"i_D"}, {}},
                          Term{1.0, {"omega_g", "i_Q"}, {}},
                          Term{inv_l, {"v_k_D"}, {}},
                          Term{-inv_l, {"v_l_D"}, {}}});
  b.add_equation("rl.q", {Term{-1.0, {"i_Q_dot"}, {}},
                          Term{-a, {"i_Q"}, {}},
                          Term{-1.0, {"omega_g", "i_D"}, {}},
                          Term{inv_l, {"v_k_Q"}, {}},
                          Term{-inv_l, {"v_l_Q"}, {}}});
  return b.build();
}

Cpn1Model resistive_load_block(const BlockParams& params, int n_branches,
                               std::vector<double> signs) {
  if (params.r_load <= 0.0)
    throw std::invalid_argument("resistive_load_block: nonpositive r_load");
  if (n_branches < 1)
    throw std::invalid_argument("resistive_load_block: need at least one branch");
  if (signs.empty()) signs.assign(static_cast<std::size_t>(n_branches), 1.0);
  if (signs.size() != static_cast<std::size_t>(n_branches))
    throw std::invalid_argument("resistive_load_block: signs/branch mismatch");

  EquationBuilder b;
  for (int k = 1; k <= n_branches; ++k) {
    b.add_input("i" + std::to_string(k) + "_D");
    b.add_input("i" + std::to_string(k) + "_Q");
  }
  b.add_output("v_D");
  b.add_output("v_Q");

  std::vector<Term> eq_d{Term{-1.0, {"v_D"}, {}}};
  std::vector<Term> eq_q{Term{-1.0, {"v_Q"}, {}}};
  for (int k = 1; k <= n_branches; ++k) {
    const double c = params.r_load * signs[static_cast<std::size_t>(k - 1)];
    eq_d.push_back(Term{c, {"i" + std::to_string(k) + "_D"}, {}});
    eq_q.push_back(Term{c, {"i" + std::to_string(k) + "_Q"}, {}});
  }
  b.add_equation("load.d", std::move(eq_d));
  b.add_equation("load.q", std::move(eq_q));
  return b.build();
}

// ============================================================================
// Registry
// ============================================================================

std::vector<std::string> block_names() {
  return {"pll",           "vsm",
          "droop_q",       "virtual_admittance",
          "current_control", "rl_branch",
          "resistive_load", "rotation"};
}

Cpn1Model block_by_name(const std::string& name, const BlockParams& params) {
  if (name == "pll") return pll_block(params);
  if (name == "vsm") return vsm_block(params);
  if (name == "droop_q") return droop_q_block(params);
  if (name == "virtual_admittance") return virtual_admittance_block(params);
  if (name == "current_control") return current_control_block(params);
  if (name == "rl_branch") return rl_branch_block(params);
  if (name == "resistive_load") return resistive_load_block(params);
  if (name == "rotation") {
    TrigLift local{"theta_i", "z_cos_i", "z_sin_i", ""};
    TrigLift global_frame{"theta_grid", "z_cos_grid", "z_sin_grid", ""};
    return rotation_block(local, global_frame);
  }
  throw std::invalid_argument("unknown block '" + name + "'");
}

}  // namespace mlstab
