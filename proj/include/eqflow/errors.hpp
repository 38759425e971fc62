#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eqflow {

// Malformed input: bad schema, violated construction invariant. CLI maps to exit 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A structural defect of the instance itself (failed assumption, infeasibility,
// non-convergence). Carries a machine-readable witness. CLI maps to exit 1.
enum class DiagnosticKind {
  kUnbalancedExitFlow,
  kInfeasible,        // witness: violating retaining set
  kDeadNode,          // witness: dead nodes (one with q < 0, or pruning refused)
  kProfitableLoop,    // witness: the loop
  kHallViolation,     // witness: violating source subset K
  kNoConvergence,
  kInternal,          // theorem-level self-check failed
};

inline const char* diagnostic_kind_name(DiagnosticKind k) {
  switch (k) {
    case DiagnosticKind::kUnbalancedExitFlow: return "unbalanced_exit_flow";
    case DiagnosticKind::kInfeasible: return "infeasible";
    case DiagnosticKind::kDeadNode: return "dead_node";
    case DiagnosticKind::kProfitableLoop: return "profitable_loop";
    case DiagnosticKind::kHallViolation: return "hall_violation";
    case DiagnosticKind::kNoConvergence: return "no_convergence";
    case DiagnosticKind::kInternal: return "internal";
  }
  return "unknown";
}

class SolveDiagnostic : public std::runtime_error {
 public:
  SolveDiagnostic(DiagnosticKind kind, const std::string& what,
                  std::vector<std::string> witness_nodes = {},
                  double value = 0.0)
      : std::runtime_error(what),
        kind_(kind),
        witness_nodes_(std::move(witness_nodes)),
        value_(value) {}

  DiagnosticKind kind() const { return kind_; }
  const std::vector<std::string>& witness_nodes() const { return witness_nodes_; }
  double value() const { return value_; }

 private:
  DiagnosticKind kind_;
  std::vector<std::string> witness_nodes_;  // node names: a set, a cycle, ...
  double value_;                            // deficit, profit, ... depending on kind
};

}  // namespace eqflow
