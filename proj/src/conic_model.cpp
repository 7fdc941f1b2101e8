#include "socpf/conic_model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "socpf/common.hpp"

namespace socpf {

LinearExpr& LinearExpr::add(const LinearExpr& other, double scale) {
    for (const auto& [v, c] : other.terms) add(v, c * scale);
    constant += other.constant * scale;
    return *this;
}

double LinearExpr::evaluate(std::span<const double> x) const {
    double acc = constant;
    for (const auto& [v, c] : terms) acc += c * x[static_cast<size_t>(v)];
    return acc;
}

VarId ConicModel::add_variable(std::string name, double lb, double ub, VarKind kind) {
    if (lb > ub) throw PreconditionError("variable " + name + " has lb > ub");
    vars_.push_back({std::move(name), lb, ub, kind});
    return static_cast<VarId>(vars_.size() - 1);
}

int ConicModel::add_row(std::string name, LinearExpr expr, Sense sense, double rhs) {
    for (const auto& [v, c] : expr.terms) {
        if (v < 0 || v >= num_variables()) throw PreconditionError("row " + name + " references unknown variable");
        (void)c;
    }
    rows_.push_back({std::move(name), std::move(expr), sense, rhs});
    return static_cast<int>(rows_.size() - 1);
}

bool ConicModel::add_cone(SocConstraint cone) {
    if (cone_names_.count(cone.name)) return false;
    cone_names_.insert(cone.name);
    cones_.push_back(std::move(cone));
    return true;
}

void ConicModel::set_bounds(VarId v, double lb, double ub) {
    if (lb > ub) throw PreconditionError("set_bounds: lb > ub for " + vars_.at(static_cast<size_t>(v)).name);
    auto& var = vars_.at(static_cast<size_t>(v));
    var.lb = lb;
    var.ub = ub;
}

int ConicModel::num_binaries() const {
    return static_cast<int>(std::count_if(vars_.begin(), vars_.end(),
                                          [](const Variable& v) { return v.kind == VarKind::Binary; }));
}

double ConicModel::max_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (size_t i = 0; i < vars_.size(); ++i) {
        worst = std::max({worst, vars_[i].lb - x[i], x[i] - vars_[i].ub});
    }
    for (const auto& row : rows_) {
        const double lhs = row.expr.evaluate(x);
        switch (row.sense) {
            case Sense::Eq: worst = std::max(worst, std::abs(lhs - row.rhs)); break;
            case Sense::Le: worst = std::max(worst, lhs - row.rhs); break;
            case Sense::Ge: worst = std::max(worst, row.rhs - lhs); break;
        }
    }
    for (const auto& cone : cones_) {
        double sq = 0.0;
        for (const auto& t : cone.tail) {
            const double v = t.evaluate(x);
            sq += v * v;
        }
        worst = std::max(worst, std::sqrt(sq) - cone.head.evaluate(x));
    }
    return worst;
}

namespace {

void write_expr(std::ostream& out, const LinearExpr& e) {
    out << e.constant << ' ' << e.terms.size();
    for (const auto& [v, c] : e.terms) out << ' ' << v << ' ' << c;
}

const char* sense_code(Sense s) {
    switch (s) {
        case Sense::Eq: return "E";
        case Sense::Le: return "L";
        case Sense::Ge: return "G";
    }
    return "?";
}

}  // namespace

void write_model(std::ostream& out, const ConicModel& model) {
    const auto old_precision = out.precision();
    out << std::setprecision(17);
    out << "# socpf conic model v1\n";
    out << "VARIABLES " << model.num_variables() << '\n';
    for (int i = 0; i < model.num_variables(); ++i) {
        const auto& v = model.variable(i);
        out << i << ' ' << v.name << ' ' << (v.kind == VarKind::Binary ? 'B' : 'C') << ' ' << v.lb << ' '
            << v.ub << '\n';
    }
    out << "OBJECTIVE ";
    write_expr(out, model.objective());
    out << '\n';
    out << "ROWS " << model.rows().size() << '\n';
    for (const auto& r : model.rows()) {
        out << r.name << ' ' << sense_code(r.sense) << ' ' << r.rhs << ' ';
        write_expr(out, r.expr);
        out << '\n';
    }
    out << "CONES " << model.cones().size() << '\n';
    for (const auto& c : model.cones()) {
        out << c.name << ' ' << c.tail.size() << '\n';
        out << "  HEAD ";
        write_expr(out, c.head);
        out << '\n';
        for (const auto& t : c.tail) {
            out << "  TAIL ";
            write_expr(out, t);
            out << '\n';
        }
    }
    out << "GROUPS " << model.exclusive_zero_groups().size() << '\n';
    for (const auto& g : model.exclusive_zero_groups()) {
        out << g.size();
        for (VarId v : g) out << ' ' << v;
        out << '\n';
    }
    out.precision(old_precision);
}

}  // namespace socpf
