#include "socpf/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

#include "socpf/common.hpp"

namespace socpf {

using json = nlohmann::json;

char phase_char(Phase p) { return "ABC"[static_cast<int>(p)]; }

Phase parse_phase(std::string_view s) {
    if (s == "A" || s == "a") return Phase::A;
    if (s == "B" || s == "b") return Phase::B;
    if (s == "C" || s == "c") return Phase::C;
    throw InputError("unknown phase '" + std::string(s) + "'");
}

double nominal_angle(Phase p) {
    switch (p) {
        case Phase::A: return 0.0;
        case Phase::B: return -2.0 * std::numbers::pi / 3.0;
        case Phase::C: return 2.0 * std::numbers::pi / 3.0;
    }
    return 0.0;
}

int LineBlock::index_of(Phase p) const {
    auto it = std::find(phases.begin(), phases.end(), p);
    return it == phases.end() ? -1 : static_cast<int>(it - phases.begin());
}

bool operator==(const LineBlock& a, const LineBlock& b) {
    return a.from == b.from && a.to == b.to && a.phases == b.phases && a.g.rows() == b.g.rows() &&
           a.b.rows() == b.b.rows() && a.g == b.g && a.b == b.b;
}

bool operator==(const Feeder& a, const Feeder& b) {
    return a.mva_base == b.mva_base && a.kv_base == b.kv_base && a.prices == b.prices && a.buses == b.buses &&
           a.lines == b.lines && a.loads == b.loads && a.pv_units == b.pv_units && a.substation == b.substation;
}

int Feeder::node_index(const NodeRef& n) const {
    auto it = node_lookup_.find({n.bus, static_cast<int>(n.phase)});
    if (it == node_lookup_.end()) throw InputError("unknown node " + n.str());
    return it->second;
}

int Feeder::bus_index(const std::string& id) const {
    auto it = bus_lookup_.find(id);
    if (it == bus_lookup_.end()) throw InputError("reference to undeclared bus '" + id + "'");
    return it->second;
}

std::vector<int> Feeder::substation_nodes() const {
    std::vector<int> out;
    for (int i = 0; i < num_nodes(); ++i)
        if (is_substation_node(i)) out.push_back(i);
    return out;
}

std::complex<double> Feeder::substation_voltage(int node) const {
    return std::polar(substation.v_pu, substation.angle_a + nominal_angle(nodes_[static_cast<size_t>(node)].phase));
}

std::vector<std::complex<double>> Feeder::node_demand() const {
    std::vector<std::complex<double>> d(nodes_.size());
    for (const auto& l : loads) d[static_cast<size_t>(node_index(l.node))] += std::complex<double>(l.p, l.q);
    return d;
}

int Feeder::num_vvc() const {
    return static_cast<int>(std::count_if(pv_units.begin(), pv_units.end(), [](const PVUnit& u) { return u.has_vvc; }));
}

namespace {

bool symmetric(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

}  // namespace

void Feeder::finalize() {
    if (!(mva_base > 0) || !(kv_base > 0)) throw InputError("bases must be positive");
    nodes_.clear();
    node_bus_.clear();
    node_lookup_.clear();
    bus_lookup_.clear();
    for (size_t bi = 0; bi < buses.size(); ++bi) {
        const auto& b = buses[bi];
        if (b.id.empty()) throw InputError("bus with empty id");
        if (!bus_lookup_.emplace(b.id, static_cast<int>(bi)).second) throw InputError("duplicate bus '" + b.id + "'");
        if (b.phases.empty()) throw InputError("bus '" + b.id + "' has no phases");
        if (!(b.v_min < b.v_max)) throw InputError("bus '" + b.id + "' has v_min >= v_max");
        for (Phase p : b.phases) {
            NodeRef n{b.id, p};
            if (!node_lookup_.emplace(std::make_pair(b.id, static_cast<int>(p)), num_nodes()).second)
                throw InputError("duplicate node " + n.str());
            nodes_.push_back(n);
            node_bus_.push_back(static_cast<int>(bi));
        }
    }

    if (substation.bus.empty()) throw InputError("missing substation");
    sub_bus_ = bus_index(substation.bus);
    if (!(substation.v_pu > 0)) throw InputError("substation voltage must be positive");

    std::vector<std::vector<int>> adj(buses.size());
    std::vector<int> touched(nodes_.size(), 0);
    std::set<std::pair<int, int>> seen;
    for (const auto& l : lines) {
        const int f = bus_index(l.from), t = bus_index(l.to);
        if (f == t) throw InputError("line " + l.from + "-" + l.to + " is a self loop");
        if (!seen.insert({std::min(f, t), std::max(f, t)}).second)
            throw InputError("non-radial topology: parallel lines between " + l.from + " and " + l.to);
        const auto n = static_cast<Eigen::Index>(l.phases.size());
        if (n == 0) throw InputError("line " + l.from + "-" + l.to + " has no phases");
        if (std::set<Phase>(l.phases.begin(), l.phases.end()).size() != l.phases.size())
            throw InputError("line " + l.from + "-" + l.to + " repeats a phase");
        if (l.g.rows() != n || l.g.cols() != n || l.b.rows() != n || l.b.cols() != n)
            throw InputError("line " + l.from + "-" + l.to + " admittance block has wrong shape");
        if (!symmetric(l.g) || !symmetric(l.b))
            throw InputError("asymmetric admittance block on line " + l.from + "-" + l.to);
        for (Phase p : l.phases) {
            touched[static_cast<size_t>(node_index(l.from, p))] = 1;
            touched[static_cast<size_t>(node_index(l.to, p))] = 1;
        }
        adj[static_cast<size_t>(f)].push_back(t);
        adj[static_cast<size_t>(t)].push_back(f);
    }
    if (lines.size() + 1 != buses.size())
        throw InputError("non-radial topology: " + std::to_string(lines.size()) + " lines for " +
                         std::to_string(buses.size()) + " buses");
    std::vector<int> visited(buses.size(), 0);
    std::queue<int> q;
    q.push(sub_bus_);
    visited[static_cast<size_t>(sub_bus_)] = 1;
    while (!q.empty()) {
        const int b = q.front();
        q.pop();
        for (int nb : adj[static_cast<size_t>(b)])
            if (!visited[static_cast<size_t>(nb)]) {
                visited[static_cast<size_t>(nb)] = 1;
                q.push(nb);
            }
    }
    for (size_t b = 0; b < buses.size(); ++b)
        if (!visited[b]) throw InputError("non-radial topology: bus '" + buses[b].id + "' is not connected");
    for (int i = 0; i < num_nodes(); ++i)
        if (!touched[static_cast<size_t>(i)] && !is_substation_node(i) && buses.size() > 1)
            throw InputError("node " + nodes_[static_cast<size_t>(i)].str() + " is not served by any line");

    for (const auto& l : loads) {
        node_index(l.node);
        if (l.p < 0) throw InputError("negative load at " + l.node.str());
    }
    for (auto& pv : pv_units) {
        node_index(pv.node);
        if (pv.p_max < 0 || pv.p_max > pv.s_max) throw InputError("PV " + pv.name + " needs 0 <= p_max <= s_max");
        pv.colocated_demand.reset();
        for (size_t k = 0; k < loads.size(); ++k)
            if (loads[k].node == pv.node) {
                pv.colocated_demand = static_cast<int>(k);
                break;
            }
    }
}

std::pair<double, double> line_admittance(const LineBlock& line, Phase p, Phase q) {
    const int i = line.index_of(p), j = line.index_of(q);
    if (i < 0 || j < 0)
        throw PreconditionError(std::string("phase not present on line ") + line.from + "-" + line.to);
    return {line.g(i, j), line.b(i, j)};
}

VoltageState flat_start(const Feeder& f) {
    VoltageState v;
    v.mag.assign(static_cast<size_t>(f.num_nodes()), f.substation.v_pu);
    v.ang.resize(static_cast<size_t>(f.num_nodes()));
    for (int i = 0; i < f.num_nodes(); ++i)
        v.ang[static_cast<size_t>(i)] = f.substation.angle_a + nominal_angle(f.node(i).phase);
    return v;
}

// ---------------------------------------------------------------- parsing

namespace {

std::pair<int, int> line_col(std::string_view text, size_t byte) {
    int line = 1, col = 1;
    for (size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

const json& field(const json& obj, const char* key, const std::string& ctx) {
    if (!obj.is_object() || !obj.contains(key)) throw InputError(ctx + ": missing field '" + key + "'");
    return obj.at(key);
}

double number(const json& obj, const char* key, const std::string& ctx) {
    const json& v = field(obj, key, ctx);
    if (!v.is_number()) throw InputError(ctx + ": field '" + key + "' must be a number");
    return v.get<double>();
}

double number_or(const json& obj, const char* key, double def, const std::string& ctx) {
    return obj.contains(key) ? number(obj, key, ctx) : def;
}

std::string string_field(const json& obj, const char* key, const std::string& ctx) {
    const json& v = field(obj, key, ctx);
    if (!v.is_string()) throw InputError(ctx + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

std::vector<Phase> phase_list(const json& v, const std::string& ctx) {
    if (!v.is_array()) throw InputError(ctx + ": phases must be an array");
    std::vector<Phase> out;
    for (const auto& p : v) {
        if (!p.is_string()) throw InputError(ctx + ": phase must be a string");
        out.push_back(parse_phase(p.get<std::string>()));
    }
    return out;
}

Eigen::MatrixXd matrix(const json& v, Eigen::Index n, const std::string& ctx) {
    if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != n)
        throw InputError(ctx + ": matrix must have " + std::to_string(n) + " rows");
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = v[static_cast<size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
            throw InputError(ctx + ": matrix must be square");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!row[static_cast<size_t>(j)].is_number()) throw InputError(ctx + ": matrix entry must be a number");
            m(i, j) = row[static_cast<size_t>(j)].get<double>();
        }
    }
    return m;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

json phases_json(const std::vector<Phase>& ps) {
    json out = json::array();
    for (Phase p : ps) out.push_back(std::string(1, phase_char(p)));
    return out;
}

}  // namespace

Feeder parse_feeder(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError("feeder JSON syntax error", line, col);
    }
    if (!doc.is_object()) throw InputError("feeder document must be a JSON object");

    Feeder f;
    const json& bases = field(doc, "bases", "feeder");
    f.mva_base = number(bases, "mva", "bases");
    f.kv_base = number(bases, "kv", "bases");
    if (!(f.mva_base > 0) || !(f.kv_base > 0)) throw InputError("bases must be positive");
    const double kw_base = f.mva_base * 1000.0;
    const double z_base = f.kv_base * f.kv_base / (3.0 * f.mva_base);

    if (doc.contains("prices")) {
        const json& p = doc["prices"];
        f.prices.grid_per_mwh = number_or(p, "grid_per_mwh", f.prices.grid_per_mwh, "prices");
        f.prices.pv_per_mwh = number_or(p, "pv_per_mwh", f.prices.pv_per_mwh, "prices");
    }

    for (const auto& b : field(doc, "buses", "feeder")) {
        Bus bus;
        bus.id = string_field(b, "id", "bus");
        const std::string ctx = "bus '" + bus.id + "'";
        bus.phases = b.contains("phases") ? phase_list(b["phases"], ctx)
                                          : std::vector<Phase>{Phase::A, Phase::B, Phase::C};
        bus.v_min = number_or(b, "v_min", 0.95, ctx);
        bus.v_max = number_or(b, "v_max", 1.05, ctx);
        f.buses.push_back(std::move(bus));
    }

    if (doc.contains("lines")) {
        for (const auto& l : doc["lines"]) {
            LineBlock line;
            line.from = string_field(l, "from", "line");
            line.to = string_field(l, "to", "line");
            const std::string ctx = "line " + line.from + "-" + line.to;
            line.phases = phase_list(field(l, "phases", ctx), ctx);
            const auto n = static_cast<Eigen::Index>(line.phases.size());
            if (l.contains("g_pu") || l.contains("b_pu")) {
                line.g = matrix(field(l, "g_pu", ctx), n, ctx);
                line.b = matrix(field(l, "b_pu", ctx), n, ctx);
            } else {
                const double length = number_or(l, "length", 1.0, ctx);
                if (!(length > 0)) throw InputError(ctx + ": length must be positive");
                const Eigen::MatrixXd r = matrix(field(l, "r_ohm", ctx), n, ctx);
                const Eigen::MatrixXd x = matrix(field(l, "x_ohm", ctx), n, ctx);
                if (!symmetric(r) || !symmetric(x)) throw InputError("asymmetric admittance block on " + ctx);
                Eigen::MatrixXcd z(n, n);
                z.real() = r * (length / z_base);
                z.imag() = x * (length / z_base);
                Eigen::FullPivLU<Eigen::MatrixXcd> lu(z);
                if (!lu.isInvertible()) throw InputError(ctx + ": singular impedance matrix");
                Eigen::MatrixXcd y = lu.inverse();
                y = (0.5 * (y + y.transpose())).eval();
                line.g = y.real();
                line.b = y.imag();
            }
            f.lines.push_back(std::move(line));
        }
    }

    if (doc.contains("loads")) {
        for (const auto& l : doc["loads"]) {
            Load load;
            load.node.bus = string_field(l, "bus", "load");
            load.node.phase = parse_phase(string_field(l, "phase", "load"));
            const std::string ctx = "load at " + load.node.str();
            if (l.contains("p_pu")) {
                load.p = number(l, "p_pu", ctx);
                load.q = number_or(l, "q_pu", 0.0, ctx);
            } else {
                load.p = number(l, "p_kw", ctx) / kw_base;
                load.q = number_or(l, "q_kvar", 0.0, ctx) / kw_base;
            }
            f.loads.push_back(std::move(load));
        }
    }

    if (doc.contains("pv")) {
        int k = 0;
        for (const auto& p : doc["pv"]) {
            PVUnit pv;
            pv.node.bus = string_field(p, "bus", "pv");
            pv.node.phase = parse_phase(string_field(p, "phase", "pv"));
            pv.name = p.contains("name") ? string_field(p, "name", "pv") : "pv" + std::to_string(k);
            const std::string ctx = "pv " + pv.name;
            if (p.contains("p_max_pu")) {
                pv.p_max = number(p, "p_max_pu", ctx);
                pv.s_max = number(p, "s_max_pu", ctx);
            } else {
                pv.p_max = number(p, "p_max_kw", ctx) / kw_base;
                pv.s_max = number(p, "s_max_kva", ctx) / kw_base;
            }
            if (p.contains("vvc")) {
                if (!p["vvc"].is_boolean()) throw InputError(ctx + ": vvc must be a boolean");
                pv.has_vvc = p["vvc"].get<bool>();
            }
            f.pv_units.push_back(std::move(pv));
            ++k;
        }
    }

    const json& sub = field(doc, "substation", "feeder");
    f.substation.bus = string_field(sub, "bus", "substation");
    f.substation.v_pu = number_or(sub, "v_pu", 1.0, "substation");
    if (sub.contains("rad_a")) f.substation.angle_a = number(sub, "rad_a", "substation");
    else f.substation.angle_a = number_or(sub, "deg_a", 0.0, "substation") * std::numbers::pi / 180.0;

    f.finalize();
    return f;
}

Feeder load_feeder(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open feeder file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_feeder(ss.str());
}

std::string serialize_feeder(const Feeder& f) {
    json doc;
    doc["bases"] = {{"mva", f.mva_base}, {"kv", f.kv_base}};
    doc["prices"] = {{"grid_per_mwh", f.prices.grid_per_mwh}, {"pv_per_mwh", f.prices.pv_per_mwh}};
    doc["buses"] = json::array();
    for (const auto& b : f.buses)
        doc["buses"].push_back({{"id", b.id}, {"phases", phases_json(b.phases)}, {"v_min", b.v_min}, {"v_max", b.v_max}});
    doc["lines"] = json::array();
    for (const auto& l : f.lines)
        doc["lines"].push_back({{"from", l.from},
                                {"to", l.to},
                                {"phases", phases_json(l.phases)},
                                {"g_pu", matrix_json(l.g)},
                                {"b_pu", matrix_json(l.b)}});
    doc["loads"] = json::array();
    for (const auto& l : f.loads)
        doc["loads"].push_back({{"bus", l.node.bus},
                                {"phase", std::string(1, phase_char(l.node.phase))},
                                {"p_pu", l.p},
                                {"q_pu", l.q}});
    doc["pv"] = json::array();
    for (const auto& p : f.pv_units)
        doc["pv"].push_back({{"name", p.name},
                             {"bus", p.node.bus},
                             {"phase", std::string(1, phase_char(p.node.phase))},
                             {"p_max_pu", p.p_max},
                             {"s_max_pu", p.s_max},
                             {"vvc", p.has_vvc}});
    doc["substation"] = {{"bus", f.substation.bus}, {"v_pu", f.substation.v_pu}, {"rad_a", f.substation.angle_a}};
    return doc.dump(2);
}

}  // namespace socpf
