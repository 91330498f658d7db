#include <iomanip>
#include <ostream>

#include "ancm/lmi.hpp"

namespace ancm::lmi {

void dump_problem(std::ostream& out, const LmiProblem& p, const SdpSolution* sol) {
  out << std::setprecision(10);
  out << "variables " << p.variables().size() << " scalars " << p.num_scalars() << "\n";
  for (const auto& v : p.variables()) {
    const char* kind = v.kind == VarKind::kSymmetric ? "sym" : (v.kind == VarKind::kScalar ? "scalar" : "scalar>=0");
    out << "  " << v.name << " " << kind << " size " << v.size << " offset " << v.offset << "\n";
  }
  out << "constraints " << p.constraints().size() << "\n";
  for (const auto& c : p.constraints()) {
    out << "  " << c.name << " rows " << c.expr.rows() << " terms " << c.expr.terms().size()
        << " margin " << c.margin << "\n";
  }
  if (sol == nullptr) return;
  out << "status " << to_string(sol->status) << " objective " << sol->objective << " worst "
      << sol->worst_margin << " gap " << sol->gap << " newton " << sol->newton_steps << "\n";
  for (size_t i = 0; i < p.variables().size(); ++i) {
    const VarHandle h{static_cast<int>(i)};
    out << "  " << p.variables()[i].name << " =\n" << p.value(h, sol->y) << "\n";
  }
}

}  // namespace ancm::lmi
