#include "rva/recursion.hpp"

#include <fmt/format.h>

namespace rva {

void RecursionTrace::write_dot(std::ostream& out, const std::string& name) const {
  out << "digraph " << name << " {\n  rankdir=RL;\n";
  for (const auto& r : rounds) {
    out << fmt::format("  r{} [label=\"t={}\\ncond={}\\nlambda={:.4f}\"{}];\n", r.round, r.round,
                       r.cond ? 1 : 0, r.lambda, r.cond ? ", shape=box" : "");
  }
  for (const auto& r : rounds) {
    if (r.t_p) out << fmt::format("  r{} -> r{} [label=\"{}->{}\"];\n", r.round, *r.t_p, r.round, *r.t_p);
  }
  out << "}\n";
}

void RecursionTrace::write_text(std::ostream& out) const {
  for (const auto& r : rounds) {
    out << fmt::format("round {} cond {} lambda {:.6f}", r.round, r.cond ? 1 : 0, r.lambda);
    if (r.t_p) out << " t_p " << *r.t_p;
    out << " chain";
    for (std::size_t c : chain(r.round)) out << ' ' << c;
    out << "\n  alpha";
    for (double a : r.alpha) out << fmt::format(" {:.6g}", a);
    out << "\n  att";
    for (double a : r.att) out << fmt::format(" {:.6g}", a);
    out << '\n';
  }
}

}  // namespace rva
