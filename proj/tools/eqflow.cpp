#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "eqflow/eqflow.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiagnostic = 1;  // failed assumption / feasibility / verification
constexpr int kExitBadInput = 2;    // I/O or schema

eqflow::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw eqflow::ValidationError("cannot open '" + path + "'");
  eqflow::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw eqflow::ValidationError(path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw eqflow::ValidationError("cannot write '" + path + "'");
  out << text;
}

void print_diagnostic(const eqflow::SolveDiagnostic& d) {
  eqflow::json j;
  j["kind"] = eqflow::diagnostic_kind_name(d.kind());
  j["message"] = d.what();
  j["nodes"] = d.witness_nodes();
  j["value"] = d.value();
  std::cerr << j.dump(2) << "\n";
}

double default_tol() {
  if (const char* env = std::getenv("EQFLOW_TOL")) {
    try {
      double v = std::stod(env);
      if (v > 0.0) return v;
    } catch (...) {
    }
    std::cerr << "ignoring invalid EQFLOW_TOL\n";
  }
  return 1e-8;
}

struct CheckResult {
  bool ok = true;
  void report(const std::string& label, bool pass, const eqflow::json& detail) {
    ok = ok && pass;
    std::cout << label << ": " << (pass ? "pass" : "FAIL");
    if (!pass) std::cout << "  " << detail.dump();
    std::cout << "\n";
  }
};

int run_check(const std::string& path) {
  eqflow::FlowProblem fp = eqflow::parse_problem(load_json(path));
  CheckResult res;

  // Order 2 -> 3 -> 1 so the first structural defect is named first.
  eqflow::Assumption2Report a2 = eqflow::check_assumption2(fp.net, fp.q);
  eqflow::json dead = eqflow::json::array();
  for (int z : a2.dead_nodes) dead.push_back(fp.net.name(z));
  res.report("assumption 2 (every node reaches a target)", a2.ok,
             eqflow::json{{"dead_nodes", dead}});

  try {
    eqflow::LoopReport loops = eqflow::check_no_profitable_loops(fp.net, fp.g);
    eqflow::json detail;
    if (!loops.ok) {
      eqflow::json cyc = eqflow::json::array();
      for (int z : loops.violating_loop) cyc.push_back(fp.net.name(z));
      detail = {{"loop", cyc}, {"sample_price", loops.sample_price}, {"profit", loops.profit}};
    }
    res.report("assumption 3 (no profitable loops)", loops.ok, detail);
  } catch (const eqflow::ValidationError& e) {
    res.report("assumption 3 (no profitable loops)", false, eqflow::json{{"error", e.what()}});
  }

  eqflow::FeasibilityReport feas = eqflow::check_feasibility(fp.net, fp.q);
  eqflow::json detail;
  if (!feas.feasible) {
    eqflow::json set = eqflow::json::array();
    for (int z : feas.violating_set) set.push_back(fp.net.name(z));
    detail = {{"violating_retaining_set", set}, {"deficit", feas.deficit}};
  }
  res.report("assumption 1 (retaining sets keep q >= 0)", feas.feasible, detail);

  return res.ok ? kExitOk : kExitDiagnostic;
}

int run_solve_one(const std::string& path, double tol, const std::optional<std::string>& ground,
                  const std::optional<std::string>& out_path, bool all_diagnostics) {
  eqflow::FlowProblem fp = eqflow::parse_problem(load_json(path));
  if (all_diagnostics) {
    int check_rc = run_check(path);
    if (check_rc != kExitOk) return check_rc;
  }
  eqflow::SolveOptions opts;
  opts.tol = tol;
  opts.ground = ground;
  eqflow::EquilibriumOutcome out = eqflow::solve(fp, opts);
  std::string text = eqflow::outcome_to_json(fp, out).dump(2) + "\n";
  if (out_path)
    write_text(*out_path, text);
  else
    std::cout << text;
  if (!out.certificate.pass) {
    std::cerr << "certificate failed at tol " << tol << "\n";
    return kExitDiagnostic;
  }
  return kExitOk;
}

int run_solve_batch(const std::string& dir, double tol) {
  namespace fs = std::filesystem;
  std::vector<std::string> inputs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name.size() > 5 && name.substr(name.size() - 5) == ".json" &&
        name.find(".outcome.") == std::string::npos)
      inputs.push_back(entry.path().string());
  }
  std::sort(inputs.begin(), inputs.end());

  struct Item {
    std::string path;
    int rc = kExitOk;
    std::string note;
  };
  std::vector<Item> items(inputs.size());
  std::vector<std::future<void>> pool;
  std::size_t next = 0;
  std::mutex mu;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  for (unsigned w = 0; w < workers; ++w) {
    pool.push_back(std::async(std::launch::async, [&]() {
      while (true) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lk(mu);
          if (next >= inputs.size()) return;
          i = next++;
        }
        Item& item = items[i];
        item.path = inputs[i];
        try {
          eqflow::FlowProblem fp = eqflow::parse_problem(load_json(inputs[i]));
          eqflow::SolveOptions opts;
          opts.tol = tol;
          eqflow::EquilibriumOutcome out = eqflow::solve(fp, opts);
          std::string out_path =
              inputs[i].substr(0, inputs[i].size() - 5) + ".outcome.json";
          write_text(out_path, eqflow::outcome_to_json(fp, out).dump(2) + "\n");
          item.note = out.certificate.pass ? "ok" : "certificate failed";
          item.rc = out.certificate.pass ? kExitOk : kExitDiagnostic;
        } catch (const eqflow::SolveDiagnostic& d) {
          item.rc = kExitDiagnostic;
          item.note = d.what();
        } catch (const std::exception& e) {
          item.rc = kExitBadInput;
          item.note = e.what();
        }
      }
    }));
  }
  for (auto& f : pool) f.get();
  int rc = kExitOk;
  for (const Item& item : items) {
    std::cout << item.path << ": " << item.note << "\n";
    rc = std::max(rc, item.rc);
  }
  return rc;
}

int run_verify(const std::string& problem_path, const std::string& outcome_path, double tol) {
  eqflow::FlowProblem fp = eqflow::parse_problem(load_json(problem_path));
  eqflow::EquilibriumOutcome out = eqflow::parse_outcome(load_json(outcome_path), fp);
  eqflow::Certificate cert = eqflow::verify_equilibrium(fp, out, tol);
  eqflow::json j = {{"balance_residual", cert.balance_residual},
                    {"max_positive_rent", cert.max_positive_rent},
                    {"cs_residual", cert.cs_residual},
                    {"tol", cert.tol},
                    {"pass", cert.pass}};
  std::cout << j.dump(2) << "\n";
  return cert.pass ? kExitOk : kExitDiagnostic;
}

int run_reduce(const std::string& path, const std::optional<std::string>& out_path) {
  eqflow::FlowProblem fp = eqflow::parse_problem(load_json(path));
  eqflow::BipartiteProblem bp = eqflow::reduce_to_bipartite(fp);
  std::string text = eqflow::bipartite_to_json(bp).dump(2) + "\n";
  if (out_path)
    write_text(*out_path, text);
  else
    std::cout << text;
  return kExitOk;
}

int run_decompose(const std::string& problem_path, const std::string& outcome_path) {
  eqflow::FlowProblem fp = eqflow::parse_problem(load_json(problem_path));
  eqflow::EquilibriumOutcome out = eqflow::parse_outcome(load_json(outcome_path), fp);
  eqflow::FlowDecomposition dec = eqflow::flow_decompose(fp.net, out.mu, out.q);
  auto print_item = [&](const char* tag, const eqflow::PathFlow& pf) {
    std::cout << tag << " mass=" << pf.mass << " :";
    for (int z : pf.nodes) std::cout << " " << fp.net.name(z);
    if (tag[0] == 'l') std::cout << " (closes)";
    std::cout << "\n";
  };
  for (const auto& pf : dec.path_flows) print_item("path", pf);
  for (const auto& lf : dec.loop_flows) print_item("loop", lf);
  std::cout << dec.path_flows.size() << " paths, " << dec.loop_flows.size() << " loops\n";
  return kExitOk;
}

int run_export_dot(const std::string& problem_path,
                   const std::optional<std::string>& outcome_path) {
  eqflow::FlowProblem fp = eqflow::parse_problem(load_json(problem_path));
  if (outcome_path) {
    eqflow::EquilibriumOutcome out = eqflow::parse_outcome(load_json(*outcome_path), fp);
    std::cout << eqflow::export_dot(fp, &out);
  } else {
    std::cout << eqflow::export_dot(fp);
  }
  return kExitOk;
}

int run_import_dimacs(const std::string& path, const std::optional<std::string>& out_path) {
  std::ifstream in(path);
  if (!in) throw eqflow::ValidationError("cannot open '" + path + "'");
  eqflow::FlowProblem fp = eqflow::parse_dimacs(in);
  std::string text = eqflow::problem_to_json(fp).dump(2) + "\n";
  if (out_path)
    write_text(*out_path, text);
  else
    std::cout << text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"equilibrium flow solver and certificate checker"};
  app.require_subcommand(1);
  double tol = default_tol();

  std::string problem, outcome, dir;
  std::optional<std::string> out_path, ground, dot_outcome;
  bool all_diagnostics = false;

  CLI::App* check = app.add_subcommand("check", "run the assumption checks");
  check->add_option("problem", problem, "problem JSON")->required();

  CLI::App* solve = app.add_subcommand("solve", "solve a problem (or a directory with --batch)");
  solve->add_option("problem", problem, "problem JSON");
  solve->add_option("--tol", tol, "certificate tolerance");
  std::string ground_opt, out_opt, batch_dir;
  solve->add_option("--ground", ground_opt, "ground node (price fixed to 0)");
  solve->add_option("--out", out_opt, "write the outcome here instead of stdout");
  solve->add_option("--batch", batch_dir, "solve every *.json in a directory");
  solve->add_flag("--all-diagnostics", all_diagnostics, "run every assumption check first");

  CLI::App* verify = app.add_subcommand("verify", "check an outcome certificate");
  verify->add_option("problem", problem, "problem JSON")->required();
  verify->add_option("outcome", outcome, "outcome JSON")->required();
  verify->add_option("--tol", tol, "certificate tolerance");

  CLI::App* reduce = app.add_subcommand("reduce", "emit the associated bipartite problem");
  reduce->add_option("problem", problem, "problem JSON")->required();
  reduce->add_option("--out", out_opt, "write the bipartite JSON here");

  CLI::App* decompose = app.add_subcommand("decompose", "print the path/loop decomposition");
  decompose->add_option("problem", problem, "problem JSON")->required();
  decompose->add_option("outcome", outcome, "outcome JSON")->required();

  CLI::App* dot = app.add_subcommand("export-dot", "emit the network in DOT");
  dot->add_option("problem", problem, "problem JSON")->required();
  std::string dot_out;
  dot->add_option("outcome", dot_out, "optional outcome JSON to overlay");

  CLI::App* dimacs = app.add_subcommand("import-dimacs", "convert a DIMACS min-cost-flow file");
  dimacs->add_option("file", problem, "DIMACS input")->required();
  dimacs->add_option("--out", out_opt, "write the problem JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return run_check(problem);
    if (solve->parsed()) {
      if (!batch_dir.empty()) return run_solve_batch(batch_dir, tol);
      if (problem.empty())
        throw eqflow::ValidationError("solve: a problem file or --batch is required");
      if (!ground_opt.empty()) ground = ground_opt;
      if (!out_opt.empty()) out_path = out_opt;
      return run_solve_one(problem, tol, ground, out_path, all_diagnostics);
    }
    if (verify->parsed()) return run_verify(problem, outcome, tol);
    if (reduce->parsed()) {
      if (!out_opt.empty()) out_path = out_opt;
      return run_reduce(problem, out_path);
    }
    if (decompose->parsed()) return run_decompose(problem, outcome);
    if (dot->parsed()) {
      if (!dot_out.empty()) dot_outcome = dot_out;
      return run_export_dot(problem, dot_outcome);
    }
    if (dimacs->parsed()) {
      if (!out_opt.empty()) out_path = out_opt;
      return run_import_dimacs(problem, out_path);
    }
  } catch (const eqflow::SolveDiagnostic& d) {
    print_diagnostic(d);
    return kExitDiagnostic;
  } catch (const eqflow::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;
}
