#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eqflow/assembly.hpp"
#include "eqflow/bipartite_problem.hpp"
#include "eqflow/connection.hpp"
#include "eqflow/errors.hpp"
#include "eqflow/network.hpp"

namespace eqflow {

using nlohmann::json;

namespace io_detail {

inline double number_at(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) throw ValidationError(ctx + "." + key + ": missing");
  if (!j.at(key).is_number()) throw ValidationError(ctx + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

inline std::string string_at(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) throw ValidationError(ctx + "." + key + ": missing");
  if (!j.at(key).is_string()) throw ValidationError(ctx + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

}  // namespace io_detail

inline Connection parse_connection(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ValidationError(ctx + ": expected a connection object");
  std::string kind = io_detail::string_at(j, "kind", ctx);
  try {
    if (kind == "affine")
      return Connection::affine(io_detail::number_at(j, "slope", ctx),
                                io_detail::number_at(j, "intercept", ctx));
    if (kind == "penalty") return Connection::penalty(io_detail::number_at(j, "n", ctx));
    if (kind == "pwl") {
      if (!j.contains("points") || !j.at("points").is_array())
        throw ValidationError(ctx + ".points: expected an array of [p, g] pairs");
      std::vector<double> xs, ys;
      for (std::size_t i = 0; i < j.at("points").size(); ++i) {
        const json& pt = j.at("points")[i];
        if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
          throw ValidationError(ctx + ".points[" + std::to_string(i) +
                                "]: expected an [p, g] number pair");
        xs.push_back(pt[0].get<double>());
        ys.push_back(pt[1].get<double>());
      }
      return Connection::pwl(std::move(xs), std::move(ys),
                             io_detail::number_at(j, "left_slope", ctx),
                             io_detail::number_at(j, "right_slope", ctx));
    }
  } catch (const ValidationError& e) {
    throw ValidationError(ctx + ": " + e.what());
  }
  throw ValidationError(ctx + ".kind: unknown connection kind '" + kind + "'");
}

inline json connection_to_json(const Connection& c) {
  json j;
  if (c.is_penalty()) {
    j["kind"] = "penalty";
    j["n"] = -c.as_affine().intercept;
  } else if (c.is_affine_like()) {
    Affine a = c.as_affine();
    j["kind"] = "affine";
    j["slope"] = a.slope;
    j["intercept"] = a.intercept;
  } else {
    const Pwl& f = c.as_pwl();
    j["kind"] = "pwl";
    json pts = json::array();
    for (std::size_t i = 0; i < f.x.size(); ++i) pts.push_back({f.x[i], f.y[i]});
    j["points"] = pts;
    j["left_slope"] = f.left_slope;
    j["right_slope"] = f.right_slope;
  }
  return j;
}

inline FlowProblem parse_problem(const json& j) {
  if (!j.is_object()) throw ValidationError("problem: expected a JSON object");
  if (!j.contains("nodes") || !j.at("nodes").is_array())
    throw ValidationError("nodes: expected an array of strings");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < j.at("nodes").size(); ++i) {
    if (!j.at("nodes")[i].is_string())
      throw ValidationError("nodes[" + std::to_string(i) + "]: expected a string");
    names.push_back(j.at("nodes")[i].get<std::string>());
  }
  if (!j.contains("arcs") || !j.at("arcs").is_array())
    throw ValidationError("arcs: expected an array");

  FlowProblem fp;
  std::vector<std::pair<int, int>> arc_pairs;
  Network name_net(names, {});  // name lookup only
  for (std::size_t i = 0; i < j.at("arcs").size(); ++i) {
    const json& aj = j.at("arcs")[i];
    std::string ctx = "arcs[" + std::to_string(i) + "]";
    if (!aj.is_object()) throw ValidationError(ctx + ": expected an object");
    std::string from = io_detail::string_at(aj, "from", ctx);
    std::string to = io_detail::string_at(aj, "to", ctx);
    auto fi = name_net.find_node(from);
    auto ti = name_net.find_node(to);
    if (!fi) throw ValidationError(ctx + ".from: unknown node '" + from + "'");
    if (!ti) throw ValidationError(ctx + ".to: unknown node '" + to + "'");
    if (!aj.contains("g")) throw ValidationError(ctx + ".g: missing connection");
    arc_pairs.emplace_back(*fi, *ti);
    fp.g.push_back(parse_connection(aj.at("g"), ctx + ".g"));
  }
  try {
    fp.net = Network(names, arc_pairs);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("arcs: ") + e.what());
  }

  if (!j.contains("q") || !j.at("q").is_object())
    throw ValidationError("q: expected an object mapping node to exit flow");
  fp.q.q.assign(names.size(), 0.0);
  std::vector<bool> seen(names.size(), false);
  for (auto it = j.at("q").begin(); it != j.at("q").end(); ++it) {
    auto zi = fp.net.find_node(it.key());
    if (!zi) throw ValidationError("q." + it.key() + ": unknown node");
    if (!it.value().is_number())
      throw ValidationError("q." + it.key() + ": expected a number");
    fp.q.q[static_cast<std::size_t>(*zi)] = it.value().get<double>();
    seen[static_cast<std::size_t>(*zi)] = true;
  }
  for (std::size_t z = 0; z < names.size(); ++z)
    if (!seen[z]) throw ValidationError("q." + names[z] + ": missing");
  try {
    fp.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("q: ") + e.what());
  }
  return fp;
}

inline json problem_to_json(const FlowProblem& fp, const std::string& name = "",
                            const std::string& description = "") {
  json j;
  j["nodes"] = fp.net.names();
  json arcs = json::array();
  for (int a = 0; a < fp.net.arc_count(); ++a) {
    json aj;
    aj["from"] = fp.net.name(fp.net.arc(a).from);
    aj["to"] = fp.net.name(fp.net.arc(a).to);
    aj["g"] = connection_to_json(fp.g[static_cast<std::size_t>(a)]);
    arcs.push_back(aj);
  }
  j["arcs"] = arcs;
  json q;
  for (int z = 0; z < fp.net.node_count(); ++z)
    q[fp.net.name(z)] = fp.q.q[static_cast<std::size_t>(z)];
  j["q"] = q;
  if (!name.empty() || !description.empty()) {
    json meta;
    if (!name.empty()) meta["name"] = name;
    if (!description.empty()) meta["description"] = description;
    j["meta"] = meta;
  }
  return j;
}

inline json outcome_to_json(const FlowProblem& fp, const EquilibriumOutcome& out) {
  json j;
  json q;
  for (int z = 0; z < fp.net.node_count(); ++z)
    q[fp.net.name(z)] = out.q.q[static_cast<std::size_t>(z)];
  j["q"] = q;
  json mu = json::array();
  for (int a = 0; a < fp.net.arc_count(); ++a) {
    json aj;
    aj["from"] = fp.net.name(fp.net.arc(a).from);
    aj["to"] = fp.net.name(fp.net.arc(a).to);
    aj["flow"] = out.mu.mu[static_cast<std::size_t>(a)];
    mu.push_back(aj);
  }
  j["mu"] = mu;
  json p;
  for (int z = 0; z < fp.net.node_count(); ++z)
    p[fp.net.name(z)] = out.p[static_cast<std::size_t>(z)];
  j["p"] = p;
  j["certificate"] = {{"balance_residual", out.certificate.balance_residual},
                      {"max_positive_rent", out.certificate.max_positive_rent},
                      {"cs_residual", out.certificate.cs_residual},
                      {"tol", out.certificate.tol},
                      {"pass", out.certificate.pass}};
  j["solver_meta"] = {{"ground", out.meta.ground},
                      {"penalty_n", out.meta.penalty_n},
                      {"blocks", out.meta.blocks},
                      {"doublings", out.meta.doublings},
                      {"iterations", out.meta.bipartite_iterations},
                      {"extension_sweeps", out.meta.extension_sweeps},
                      {"pruned_nodes", out.meta.pruned_nodes}};
  return j;
}

inline EquilibriumOutcome parse_outcome(const json& j, const FlowProblem& fp) {
  if (!j.is_object()) throw ValidationError("outcome: expected a JSON object");
  EquilibriumOutcome out;
  out.q.q.assign(static_cast<std::size_t>(fp.net.node_count()), 0.0);
  out.p.assign(static_cast<std::size_t>(fp.net.node_count()), 0.0);
  out.mu.mu.assign(static_cast<std::size_t>(fp.net.arc_count()), 0.0);
  if (!j.contains("q") || !j.at("q").is_object()) throw ValidationError("q: expected an object");
  for (auto it = j.at("q").begin(); it != j.at("q").end(); ++it) {
    auto zi = fp.net.find_node(it.key());
    if (!zi) throw ValidationError("q." + it.key() + ": unknown node");
    out.q.q[static_cast<std::size_t>(*zi)] = it.value().get<double>();
  }
  if (!j.contains("p") || !j.at("p").is_object()) throw ValidationError("p: expected an object");
  std::vector<bool> seen(static_cast<std::size_t>(fp.net.node_count()), false);
  for (auto it = j.at("p").begin(); it != j.at("p").end(); ++it) {
    auto zi = fp.net.find_node(it.key());
    if (!zi) throw ValidationError("p." + it.key() + ": unknown node");
    if (!it.value().is_number()) throw ValidationError("p." + it.key() + ": expected a number");
    out.p[static_cast<std::size_t>(*zi)] = it.value().get<double>();
    seen[static_cast<std::size_t>(*zi)] = true;
  }
  for (int z = 0; z < fp.net.node_count(); ++z)
    if (!seen[static_cast<std::size_t>(z)])
      throw ValidationError("p." + fp.net.name(z) + ": missing");
  if (!j.contains("mu") || !j.at("mu").is_array())
    throw ValidationError("mu: expected an array of arc flows");
  for (std::size_t i = 0; i < j.at("mu").size(); ++i) {
    const json& aj = j.at("mu")[i];
    std::string ctx = "mu[" + std::to_string(i) + "]";
    std::string from = io_detail::string_at(aj, "from", ctx);
    std::string to = io_detail::string_at(aj, "to", ctx);
    auto fi = fp.net.find_node(from);
    auto ti = fp.net.find_node(to);
    if (!fi || !ti) throw ValidationError(ctx + ": unknown endpoint");
    auto ai = fp.net.find_arc(*fi, *ti);
    if (!ai) throw ValidationError(ctx + ": no such arc " + from + " -> " + to);
    out.mu.mu[static_cast<std::size_t>(*ai)] = io_detail::number_at(aj, "flow", ctx);
  }
  if (j.contains("certificate")) {
    const json& c = j.at("certificate");
    out.certificate.balance_residual = io_detail::number_at(c, "balance_residual", "certificate");
    out.certificate.max_positive_rent = io_detail::number_at(c, "max_positive_rent", "certificate");
    out.certificate.cs_residual = io_detail::number_at(c, "cs_residual", "certificate");
    out.certificate.tol = io_detail::number_at(c, "tol", "certificate");
    out.certificate.pass = c.contains("pass") && c.at("pass").is_boolean() &&
                           c.at("pass").get<bool>();
  }
  if (j.contains("solver_meta")) {
    const json& s = j.at("solver_meta");
    if (s.contains("ground") && s.at("ground").is_string())
      out.meta.ground = s.at("ground").get<std::string>();
    auto num = [&](const char* key, auto& field) {
      if (s.contains(key) && s.at(key).is_number())
        field = static_cast<std::decay_t<decltype(field)>>(s.at(key).get<double>());
    };
    num("penalty_n", out.meta.penalty_n);
    num("blocks", out.meta.blocks);
    num("doublings", out.meta.doublings);
    num("iterations", out.meta.bipartite_iterations);
    num("extension_sweeps", out.meta.extension_sweeps);
    num("pruned_nodes", out.meta.pruned_nodes);
  }
  return out;
}

inline json bipartite_to_json(const BipartiteProblem& bp) {
  json j;
  j["X"] = bp.x_names;
  j["Y"] = bp.y_names;
  json n, m;
  for (std::size_t i = 0; i < bp.x_names.size(); ++i) n[bp.x_names[i]] = bp.n[i];
  for (std::size_t i = 0; i < bp.y_names.size(); ++i) m[bp.y_names[i]] = bp.m[i];
  j["n"] = n;
  j["m"] = m;
  json arcs = json::array();
  for (const BpArc& a : bp.arcs) {
    json aj;
    aj["x"] = bp.x_names[static_cast<std::size_t>(a.x)];
    aj["y"] = bp.y_names[static_cast<std::size_t>(a.y)];
    aj["g"] = connection_to_json(a.g);
    if (a.penalty_added) aj["penalty_added"] = true;
    arcs.push_back(aj);
  }
  j["arcs"] = arcs;
  return j;
}

inline std::string connection_label(const Connection& c) {
  std::ostringstream os;
  if (c.is_penalty()) {
    os << "penalty(" << -c.as_affine().intercept << ")";
  } else if (c.is_affine_like()) {
    Affine a = c.as_affine();
    os << "affine(" << a.slope << "p";
    if (a.intercept >= 0.0)
      os << "+" << a.intercept;
    else
      os << a.intercept;
    os << ")";
  } else {
    os << "pwl[" << c.as_pwl().x.size() << "]";
  }
  return os.str();
}

// Graphviz view; with an outcome, arcs show flow and rent and carried arcs
// are drawn bold.
inline std::string export_dot(const FlowProblem& fp, const EquilibriumOutcome* out = nullptr) {
  std::ostringstream os;
  os << "digraph eqflow {\n";
  os << "  rankdir=LR;\n";
  for (int z = 0; z < fp.net.node_count(); ++z) {
    os << "  \"" << fp.net.name(z) << "\" [label=\"" << fp.net.name(z)
       << "\\nq=" << fp.q.q[static_cast<std::size_t>(z)];
    if (out) os << "\\np=" << out->p[static_cast<std::size_t>(z)];
    os << "\"];\n";
  }
  for (int a = 0; a < fp.net.arc_count(); ++a) {
    const Arc& arc = fp.net.arc(a);
    os << "  \"" << fp.net.name(arc.from) << "\" -> \"" << fp.net.name(arc.to) << "\" [label=\""
       << connection_label(fp.g[static_cast<std::size_t>(a)]);
    if (out) {
      double thr = fp.g[static_cast<std::size_t>(a)](out->p[static_cast<std::size_t>(arc.to)]);
      double rent = thr - out->p[static_cast<std::size_t>(arc.from)];
      os << "\\nmu=" << out->mu.mu[static_cast<std::size_t>(a)] << " rent=" << rent;
    }
    os << "\"";
    if (out && out->mu.mu[static_cast<std::size_t>(a)] > kMassTol) os << ", style=bold";
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

// DIMACS min-cost-flow reader mapped onto transferable-utility arcs:
// "a u v low cap cost" becomes an arc with G(p) = p - cost; node lines give
// supplies, negated into exit flows (their supply leaves the node). Capacity
// bounds have no counterpart here and are dropped; nonzero lower bounds are
// rejected.
inline FlowProblem parse_dimacs(std::istream& in) {
  std::string line;
  int declared_nodes = -1;
  std::vector<double> supply;
  std::vector<std::pair<int, int>> arc_pairs;
  std::vector<Connection> gs;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag == "c") continue;
    std::string at = "line " + std::to_string(lineno);
    if (tag == "p") {
      std::string kind;
      long n = 0, m = 0;
      if (!(ls >> kind >> n >> m) || kind != "min")
        throw ValidationError(at + ": expected 'p min <nodes> <arcs>'");
      declared_nodes = static_cast<int>(n);
      supply.assign(static_cast<std::size_t>(n), 0.0);
    } else if (tag == "n") {
      long id = 0;
      double b = 0.0;
      if (!(ls >> id >> b) || declared_nodes < 0 || id < 1 || id > declared_nodes)
        throw ValidationError(at + ": bad node descriptor");
      supply[static_cast<std::size_t>(id - 1)] = b;
    } else if (tag == "a") {
      long u = 0, v = 0;
      double low = 0.0, cap = 0.0, cost = 0.0;
      if (!(ls >> u >> v >> low >> cap >> cost) || declared_nodes < 0 || u < 1 || v < 1 ||
          u > declared_nodes || v > declared_nodes)
        throw ValidationError(at + ": bad arc descriptor");
      if (low != 0.0)
        throw ValidationError(at + ": nonzero lower bounds are not representable");
      arc_pairs.emplace_back(static_cast<int>(u - 1), static_cast<int>(v - 1));
      gs.push_back(Connection::affine(1.0, -cost));
    } else {
      throw ValidationError(at + ": unknown record '" + tag + "'");
    }
  }
  if (declared_nodes < 0) throw ValidationError("dimacs: missing problem line");
  FlowProblem fp;
  std::vector<std::string> names;
  for (int z = 1; z <= declared_nodes; ++z) names.push_back("n" + std::to_string(z));
  fp.net = Network(names, arc_pairs);
  fp.g = std::move(gs);
  fp.q.q.resize(static_cast<std::size_t>(declared_nodes));
  for (int z = 0; z < declared_nodes; ++z)
    fp.q.q[static_cast<std::size_t>(z)] = -supply[static_cast<std::size_t>(z)];
  fp.validate();
  return fp;
}

}  // namespace eqflow
