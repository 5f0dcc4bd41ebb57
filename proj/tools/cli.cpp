#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <Eigen/SVD>

#include "mll/error.hpp"
#include "mll/io.hpp"

namespace mll::cli {

namespace {

using io::json;

struct Common {
  std::string out_path;
};

void emit(const json& j, const Common& c, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (c.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.out_path, std::ios::binary);
  if (!f) throw DomainError("cannot write '" + c.out_path + "'");
  f << text;
}

json burnside_json(const BurnsideCount& b) {
  json types = json::array();
  for (const auto& [type, counts] : b.by_cycle_type)
    types.push_back({{"cycle_type", type}, {"elements", counts[0]}, {"fixed_per_element", counts[1]}});
  return json{{"group_order", b.group_order}, {"fixed_sum", b.fixed_sum}, {"orbits", b.orbits},
              {"by_cycle_type", types}};
}

std::string chain_text(const ClassificationReport& r, const VarSet& vars) {
  std::string out;
  for (const auto& s : r.rule_chain) out += (out.empty() ? "" : " > ") + s.describe(vars);
  return out;
}

std::string one_line(const MLLSpec& spec) {
  std::string t = io::spec_to_text(spec);
  std::replace(t.begin(), t.end(), '\n', ';');
  if (!t.empty() && t.back() == ';') t.pop_back();
  return t;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

/// λ values aligned to `spec` from a lambda file: full lambda JSON (pairs
/// matched by (effect, margin)), {"values": [...]} or a bare array.
MLLVector read_target(const MLLSpec& spec, const json& j) {
  if (j.is_object() && j.contains("spec")) {
    const MLLVector given = io::parse_lambda(j);
    if (!(given.spec.vars() == spec.vars()))
      throw DomainError("lambda.spec.variables: differ from the --spec variables");
    if (given.spec.size() != spec.size())
      throw DomainError("lambda.spec: has " + std::to_string(given.spec.size()) + " pairs, --spec has " +
                        std::to_string(spec.size()));
    std::vector<double> vals(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const auto k = given.spec.index_of(spec[i]);
      if (!k)
        throw DomainError("lambda.spec: lacks pair (" + spec.vars().format(spec[i].effect) + ", " +
                          spec.vars().format(spec[i].margin) + ")");
      vals[i] = given.values[*k];
    }
    return MLLVector(spec, std::move(vals));
  }
  if (j.is_object() && !j.contains("values")) throw DomainError("lambda: missing field 'values'");
  std::vector<double> vals = j.is_object() ? io::parse_values(j["values"], "lambda.values")
                                           : io::parse_values(j, "lambda");
  if (vals.size() != spec.size())
    throw DomainError("lambda.values: expected " + std::to_string(spec.size()) + " values, got " +
                      std::to_string(vals.size()));
  return MLLVector(spec, std::move(vals));
}

json pair_labels(const MLLSpec& spec) {
  json rows = json::array();
  for (const auto& pr : spec.pairs())
    rows.push_back(spec.vars().format(pr.effect) + "^" + spec.vars().format(pr.margin));
  return rows;
}

double min_singular_value(const Eigen::MatrixXd& J) {
  if (J.rows() == 0 || J.cols() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(J);
  const auto& s = svd.singularValues();
  // A non-square Jacobian cannot have full rank in both directions.
  return J.rows() == J.cols() ? s.minCoeff() : 0.0;
}

/// Central differences of λ∘table_from_eta along each η_K.
Eigen::MatrixXd fd_jacobian(const JointTable& t, const MLLSpec& spec, double h) {
  const EtaVector eta = eta_from_table(t);
  const Subset V = t.vars().full();
  Eigen::MatrixXd J(static_cast<Eigen::Index>(spec.size()), static_cast<Eigen::Index>(V));
  for (Subset K = 1; K <= V; ++K) {
    EtaVector up = eta, dn = eta;
    up[K] += h;
    dn[K] -= h;
    const auto lu = lambda_vector(table_from_eta(up), spec).values;
    const auto ld = lambda_vector(table_from_eta(dn), spec).values;
    for (std::size_t i = 0; i < spec.size(); ++i)
      J(static_cast<Eigen::Index>(i), K - 1) = (lu[i] - ld[i]) / (2 * h);
  }
  return J;
}

SolveOptions solve_options(double tol, int max_iter, double damping, const std::string& method,
                           std::uint64_t seed) {
  SolveOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  o.damping = damping;
  o.method = parse_method(method);
  o.seed = seed;
  o.validate();
  return o;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Marginal log-linear parameters of binary tables: smoothness classification, census and inversion.\n"
               "Cells and subsets use bit i for the i-th listed variable."};
  app.require_subcommand(1);
  Common common;
  auto add_out = [&](CLI::App* sub) { sub->add_option("--out", common.out_path, "Write JSON here instead of stdout"); };

  std::string spec_path, table_path, lambda_path, chain_path, ci_path, member_path, method = "auto";
  int vars = 3, samples = 100, max_iter = 10000, power_iter = 1000000;
  std::uint64_t seed = 0;
  double tol = 1e-10, damping = 1.0, fd_step = 1e-5, alpha = 1.0;
  bool orbits = false, csv = false, trace = false, check_fd = false, no_contraction = false, list = false;
  std::size_t search_limit = 1u << 16;

  auto* c_classify = app.add_subcommand("classify", "Classify a collection by the smoothness rules");
  c_classify->add_option("--spec", spec_path, "Spec file (text or JSON)")->required();
  c_classify->add_flag("--no-contraction", no_contraction, "Disable the contraction rule");
  add_out(c_classify);

  auto* c_enum = app.add_subcommand("enumerate", "Count complete collections on N variables");
  c_enum->add_option("--vars", vars, "Number of variables (1-4)")->required();
  c_enum->add_flag("--orbits", orbits, "Count orbits under relabeling");
  c_enum->add_flag("--list", list, "List the collections (N <= 3)");
  add_out(c_enum);

  auto* c_census = app.add_subcommand("census", "Classify every complete orbit on N variables");
  c_census->add_option("--vars", vars, "Number of variables (1-3)")->default_val(3);
  c_census->add_flag("--csv", csv, "One CSV row per orbit instead of JSON");
  c_census->add_flag("--no-contraction", no_contraction, "Disable the contraction rule");
  add_out(c_census);

  auto* c_forward = app.add_subcommand("forward", "Compute the MLL parameters of a table");
  c_forward->add_option("--table", table_path, "Table JSON")->required();
  c_forward->add_option("--spec", spec_path, "Spec file")->required();
  add_out(c_forward);

  auto* c_invert = app.add_subcommand("invert", "Recover the table from MLL parameters");
  c_invert->add_option("--spec", spec_path, "Spec file")->required();
  c_invert->add_option("--lambda", lambda_path, "Lambda JSON")->required();
  c_invert->add_option("--method", method, "auto, fixed-point, hierarchical, markov or newton");
  c_invert->add_option("--tol", tol, "Sup-norm tolerance on the residual");
  c_invert->add_option("--max-iter", max_iter, "Iteration limit");
  c_invert->add_option("--damping", damping, "Fixed-point step in (0, 1]");
  c_invert->add_option("--seed", seed, "Seed for Newton restarts");
  c_invert->add_flag("--trace", trace, "Include the residual trace");
  add_out(c_invert);

  auto* c_jac = app.add_subcommand("jacobian", "Analytic Jacobian of λ with respect to η");
  c_jac->add_option("--table", table_path, "Table JSON")->required();
  c_jac->add_option("--spec", spec_path, "Spec file")->required();
  c_jac->add_flag("--check-fd", check_fd, "Compare with central finite differences");
  c_jac->add_option("--step", fd_step, "Finite-difference step");
  add_out(c_jac);

  auto* c_smooth = app.add_subcommand("smooth-test", "Minimum singular value of the Jacobian at random tables");
  c_smooth->add_option("--spec", spec_path, "Spec file")->required();
  c_smooth->add_option("--samples", samples, "Number of Dirichlet draws")->default_val(100);
  c_smooth->add_option("--seed", seed, "Random seed")->default_val(0);
  c_smooth->add_option("--alpha", alpha, "Dirichlet concentration")->default_val(1.0);
  add_out(c_smooth);

  auto* c_markov = app.add_subcommand("markov", "Stationary block margin of a cyclic chain");
  c_markov->add_option("--chain", chain_path, "Chain JSON")->required();
  c_markov->add_option("--max-iter", power_iter, "Power iteration limit");
  add_out(c_markov);

  auto* c_model = app.add_subcommand("model", "Zero parameters and embedding of a CI model");
  c_model->add_option("--ci", ci_path, "CI statements (text or JSON)")->required();
  c_model->add_option("--member", member_path, "Free parameter values; recover a model member");
  c_model->add_option("--search-limit", search_limit, "Embeddings tried when greedy is not proven smooth");
  c_model->add_option("--tol", tol, "Sup-norm tolerance on the residual");
  c_model->add_option("--seed", seed, "Seed for Newton restarts");
  c_model->add_flag("--trace", trace, "Include the residual trace");
  add_out(c_model);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  ClassifyOptions copts;
  copts.contraction_rule = !no_contraction;

  try {
    if (*c_classify) {
      const MLLSpec spec = io::parse_spec_any(io::read_file(spec_path));
      const auto report = classify(spec, copts);
      json j{{"spec", io::to_json(spec)}, {"spec_text", io::spec_to_text(spec)}, {"complete", spec.is_complete()}};
      if (spec.is_complete()) {
        j["hierarchical"] = is_hierarchical(spec);
        if (spec.vars().size() <= 8) j["canonical_code"] = canonical_code(spec);
      }
      j["classification"] = io::to_json(report, spec.vars());
      emit(j, common, out);
    } else if (*c_enum) {
      const auto res = enumerate_complete(vars, orbits);
      json j{{"n", res.n}, {"up_to_symmetry", res.up_to_symmetry}, {"labeled", res.labeled},
             {"count", res.count}, {"burnside", burnside_json(res.burnside)}};
      if (list) {
        if (!res.materialized) throw DomainError("--list needs --vars <= 3");
        json specs = json::array();
        for (const auto& s : res.specs) specs.push_back(one_line(s));
        j["specs"] = specs;
      }
      emit(j, common, out);
    } else if (*c_census) {
      const CensusReport rep = census(vars, copts);
      if (csv) {
        std::ostringstream os;
        os << "index,spec,verdict,base_rule,rule_chain\n";
        for (std::size_t i = 0; i < rep.entries.size(); ++i) {
          const auto& e = rep.entries[i];
          const auto* base = e.report.base_step();
          os << i << "," << csv_quote(one_line(e.spec)) << "," << to_string(e.report.verdict) << ","
             << (base ? to_string(base->rule) : "") << "," << csv_quote(chain_text(e.report, e.spec.vars()))
             << "\n";
        }
        if (common.out_path.empty()) out << os.str();
        else {
          std::ofstream f(common.out_path, std::ios::binary);
          if (!f) throw DomainError("cannot write '" + common.out_path + "'");
          f << os.str();
        }
        return 0;
      }
      json fam = json::array(), gap = json::array(), entries = json::array();
      for (const auto& f : rep.families) {
        fam.push_back({{"family", f.family}, {"achieved", f.achieved}, {"target", f.target}});
        if (f.target > f.achieved)
          gap.push_back({{"family", f.family}, {"missing", f.target - f.achieved}});
      }
      for (std::size_t i = 0; i < rep.entries.size(); ++i) {
        const auto& e = rep.entries[i];
        const auto* base = e.report.base_step();
        entries.push_back({{"index", i},
                           {"spec", one_line(e.spec)},
                           {"verdict", to_string(e.report.verdict)},
                           {"base_rule", base ? to_string(base->rule) : ""},
                           {"rule_chain", chain_text(e.report, e.spec.vars())}});
      }
      json j{{"n", rep.n},
             {"labeled_complete", rep.labeled_complete},
             {"complete_orbits", rep.complete_orbits},
             {"burnside", burnside_json(rep.burnside)},
             {"hierarchical_orbits", rep.hierarchical},
             {"two_margin_extra", rep.two_margin_extra},
             {"prop1_first", rep.prop1_first},
             {"nested_first", rep.nested_first},
             {"prop2_first", rep.prop2_first},
             {"three_margin_first", rep.three_margin_first},
             {"lemma4_first", rep.lemma4_first},
             {"cyclic_first", rep.cyclic_first},
             {"contraction_first", rep.contraction_first},
             {"via_interchange", rep.via_interchange},
             {"proven_smooth", rep.proven_smooth},
             {"proven_without_contraction", rep.proven_without_contraction},
             {"unknown", rep.unknown},
             {"contraction_rule", copts.contraction_rule},
             {"families", fam},
             {"gap", gap},
             {"orbits", entries}};
      emit(j, common, out);
    } else if (*c_forward) {
      const JointTable t = io::parse_table(io::parse_json(io::read_file(table_path), table_path));
      const MLLSpec spec = io::parse_spec_any(io::read_file(spec_path));
      if (!(t.vars() == spec.vars())) throw DomainError("table and spec use different variables");
      emit(io::to_json(lambda_vector(t, spec)), common, out);
    } else if (*c_invert) {
      const MLLSpec spec = io::parse_spec_any(io::read_file(spec_path));
      const MLLVector target = read_target(spec, io::parse_json(io::read_file(lambda_path), lambda_path));
      const SolveResult r = invert(spec, target, solve_options(tol, max_iter, damping, method, seed));
      emit(io::to_json(r, trace), common, out);
    } else if (*c_jac) {
      const JointTable t = io::parse_table(io::parse_json(io::read_file(table_path), table_path));
      const MLLSpec spec = io::parse_spec_any(io::read_file(spec_path));
      if (!(t.vars() == spec.vars())) throw DomainError("table and spec use different variables");
      const Eigen::MatrixXd J = jacobian(t, spec);
      json cols = json::array(), rows = json::array();
      for (Subset K = 1; K <= spec.vars().full(); ++K) cols.push_back(spec.vars().format(K));
      for (Eigen::Index i = 0; i < J.rows(); ++i) {
        std::vector<double> r(J.cols());
        for (Eigen::Index k = 0; k < J.cols(); ++k) r[static_cast<std::size_t>(k)] = J(i, k);
        rows.push_back(r);
      }
      json j{{"rows", pair_labels(spec)}, {"columns", cols}, {"matrix", rows}};
      if (check_fd) {
        const Eigen::MatrixXd F = fd_jacobian(t, spec, fd_step);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < J.rows(); ++i)
          for (Eigen::Index k = 0; k < J.cols(); ++k)
            worst = std::max(worst, std::abs(J(i, k) - F(i, k)) / std::max(1.0, std::abs(F(i, k))));
        j["fd_step"] = fd_step;
        j["fd_max_rel_error"] = worst;
      }
      emit(j, common, out);
    } else if (*c_smooth) {
      const MLLSpec spec = io::parse_spec_any(io::read_file(spec_path));
      if (samples < 0) throw DomainError("--samples must be nonnegative");
      std::mt19937_64 rng(seed);
      std::vector<JointTable> draws;
      for (int i = 0; i < samples; ++i) draws.push_back(random_table(spec.vars(), alpha, rng));
      std::vector<double> sigma(draws.size());
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < samples; ++i)
        sigma[static_cast<std::size_t>(i)] = min_singular_value(jacobian(draws[static_cast<std::size_t>(i)], spec));
      const double at_uniform = min_singular_value(jacobian(JointTable::uniform(spec.vars()), spec));
      double worst = at_uniform;
      int worst_index = -1;
      for (std::size_t i = 0; i < sigma.size(); ++i)
        if (sigma[i] < worst) {
          worst = sigma[i];
          worst_index = static_cast<int>(i);
        }
      const double threshold = 1e-8;
      json j{{"spec_text", io::spec_to_text(spec)},
             {"complete", spec.is_complete()},
             {"samples", samples},
             {"seed", seed},
             {"alpha", alpha},
             {"uniform_min_singular_value", at_uniform},
             {"min_singular_value", worst},
             {"argmin_sample", worst_index},
             {"threshold", threshold},
             {"passed", worst > threshold},
             {"per_sample", sigma}};
      emit(j, common, out);
    } else if (*c_markov) {
      const CycleChainSpec chain = io::parse_chain(io::parse_json(io::read_file(chain_path), chain_path));
      const JointTable direct = stationary(chain);
      int iters = 0;
      const JointTable power = stationary_power(chain, 1e-14, power_iter, &iters);
      double diff = 0.0;
      for (std::size_t i = 0; i < direct.size(); ++i) diff = std::max(diff, std::abs(direct[i] - power[i]));
      json blocks = json::array();
      for (Subset b : chain.blocks) blocks.push_back(io::to_json(chain.vars, b));
      emit(json{{"blocks", blocks},
                {"stationary", io::to_json(direct)},
                {"power_iteration", {{"table", io::to_json(power)}, {"iterations", iters}, {"max_abs_diff", diff}}}},
           common, out);
    } else if (*c_model) {
      const auto in = io::parse_ci_any(io::read_file(ci_path));
      const ModelSpec m = in.embedding ? model_spec(in.vars, in.statements, *in.embedding)
                                       : model_spec(in.vars, in.statements, search_limit);
      json st = json::array(), zeros = json::array();
      for (const auto& s : m.statements) st.push_back(io::to_json(s, m.vars));
      for (const auto& pr : m.zero_pairs)
        zeros.push_back({{"margin", io::to_json(m.vars, pr.margin)}, {"effect", io::to_json(m.vars, pr.effect)}});
      json j{{"variables", m.vars.names()}, {"statements", st}, {"zero_pairs", zeros}};
      if (!m.embedding) {
        j["embedding"] = nullptr;
        j["failure"] = m.failure;
        emit(j, common, out);
        return 1;
      }
      j["embedding"] = io::to_json(*m.embedding);
      j["embedding_text"] = io::spec_to_text(*m.embedding);
      j["embedding_searched"] = m.searched;
      j["embedding_supplied"] = in.embedding.has_value();
      j["classification"] = io::to_json(classify(*m.embedding, copts), m.vars);
      json free = json::array();
      for (std::size_t i : free_pair_indices(m)) {
        const auto& pr = (*m.embedding)[i];
        free.push_back({{"margin", io::to_json(m.vars, pr.margin)}, {"effect", io::to_json(m.vars, pr.effect)}});
      }
      j["free_pairs"] = free;
      if (!member_path.empty()) {
        const auto values = io::parse_values(io::parse_json(io::read_file(member_path), member_path), "member");
        SolveOptions o;
        o.tol = tol;
        o.seed = seed;
        o.validate();
        const ModelMember mm = model_member(m, values, o);
        json checks = json::array();
        for (const auto& s : m.statements) {
          const double d = ci_discrepancy(mm.result.table, s);
          checks.push_back({{"statement", s.describe(m.vars)}, {"discrepancy", d}, {"holds", d <= 1e-9}});
        }
        json member{{"result", io::to_json(mm.result, trace)}, {"gibbs_used", mm.gibbs_used},
                    {"max_ci_discrepancy", mm.max_ci_discrepancy}, {"ci_checks", checks}};
        if (mm.gibbs) {
          json steps = json::array();
          for (const auto& s : mm.gibbs->steps)
            steps.push_back(m.vars.format(s.target) + "|" + m.vars.format(s.given));
          member["gibbs_state"] = io::to_json(m.vars, mm.gibbs->state);
          member["gibbs_steps"] = steps;
        }
        if (mm.gibbs_check) member["gibbs_check"] = *mm.gibbs_check;
        j["member"] = member;
      }
      emit(j, common, out);
    }
  } catch (const SolveError& e) {
    err << json{{"error", e.what()}, {"kind", to_string(e.kind())}, {"trace", e.trace()}}.dump() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << json{{"error", e.what()}, {"kind", "DOMAIN_ERROR"}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", e.what()}, {"kind", "DOMAIN_ERROR"}}.dump() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mll::cli
