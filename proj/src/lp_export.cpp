#include <cmath>
#include <ostream>

#include "gridbound/csv.hpp"
#include "gridbound/qp.hpp"

namespace gridbound::qp {

namespace {

std::string num(double v) { return csv::format(v); }

void write_term(std::ostream& out, double coef, const std::string& name, bool first) {
  if (coef < 0) out << (first ? "- " : " - ") << num(-coef) << ' ' << name;
  else out << (first ? "" : " + ") << num(coef) << ' ' << name;
}

}  // namespace

void write_lp(std::ostream& out, const Problem& p, const std::string& comment) {
  if (!comment.empty()) out << "\\ " << comment << '\n';
  out << "Minimize\n obj:";
  bool first = true;
  for (int j = 0; j < p.variable_count(); ++j) {
    if (p.linear()[j] == 0.0) continue;
    if (first) out << ' ';
    write_term(out, p.linear()[j], p.variable_names()[j], first);
    first = false;
  }
  bool any_quadratic = false;
  for (double q : p.quadratic()) any_quadratic |= q != 0.0;
  if (any_quadratic) {
    out << (first ? " [ " : " + [ ");
    bool qfirst = true;
    for (int j = 0; j < p.variable_count(); ++j) {
      if (p.quadratic()[j] == 0.0) continue;
      out << (qfirst ? "" : " + ") << num(p.quadratic()[j]) << ' ' << p.variable_names()[j] << " ^ 2";
      qfirst = false;
    }
    out << " ] / 2";
    first = false;
  }
  if (p.constant() != 0.0) {
    if (first) out << ' ';
    write_term(out, p.constant(), "", first);
    first = false;
  }
  if (first) out << " 0";
  out << "\nSubject To\n";
  for (int r = 0; r < p.row_count(); ++r) {
    const double lo = p.row_lower()[r];
    const double hi = p.row_upper()[r];
    if (!std::isfinite(lo) && !std::isfinite(hi)) continue;
    auto body = [&] {
      bool f = true;
      for (const auto& e : p.row(r)) {
        if (f) out << ' ';
        write_term(out, e.value, p.variable_names()[e.column], f);
        f = false;
      }
      if (f) out << " 0 " << p.variable_names().front();
    };
    const std::string& name = p.row_names()[r];
    if (std::isfinite(lo) && std::isfinite(hi) && lo == hi) {
      out << ' ' << name << ':';
      body();
      out << " = " << num(hi) << '\n';
      continue;
    }
    if (std::isfinite(lo) && std::isfinite(hi)) {
      out << ' ' << name << "_lo:";
      body();
      out << " >= " << num(lo) << '\n';
      out << ' ' << name << "_hi:";
      body();
      out << " <= " << num(hi) << '\n';
    } else if (std::isfinite(lo)) {
      out << ' ' << name << ':';
      body();
      out << " >= " << num(lo) << '\n';
    } else {
      out << ' ' << name << ':';
      body();
      out << " <= " << num(hi) << '\n';
    }
  }
  out << "Bounds\n";
  for (int j = 0; j < p.variable_count(); ++j) {
    const double lo = p.lower()[j];
    const double hi = p.upper()[j];
    const std::string& name = p.variable_names()[j];
    if (!std::isfinite(lo) && !std::isfinite(hi)) {
      out << ' ' << name << " free\n";
    } else if (!std::isfinite(hi)) {
      out << ' ' << name << " >= " << num(lo) << '\n';
    } else if (!std::isfinite(lo)) {
      out << " -inf <= " << name << " <= " << num(hi) << '\n';
    } else if (lo == hi) {
      out << ' ' << name << " = " << num(lo) << '\n';
    } else {
      out << ' ' << num(lo) << " <= " << name << " <= " << num(hi) << '\n';
    }
  }
  out << "End\n";
}

}  // namespace gridbound::qp
