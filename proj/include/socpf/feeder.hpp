#pragma once

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace socpf {

enum class Phase { A = 0, B = 1, C = 2 };

char phase_char(Phase p);
Phase parse_phase(std::string_view s);

struct NodeRef {
    std::string bus;
    Phase phase = Phase::A;

    std::string str() const { return bus + "." + phase_char(phase); }
    bool operator==(const NodeRef&) const = default;
};

struct Bus {
    std::string id;
    std::vector<Phase> phases;
    double v_min = 0.95;
    double v_max = 1.05;
    bool operator==(const Bus&) const = default;
};

/// Series admittance block of a line, per-unit, indexed by position in `phases`.
struct LineBlock {
    std::string from;
    std::string to;
    std::vector<Phase> phases;
    Eigen::MatrixXd g;
    Eigen::MatrixXd b;

    int index_of(Phase p) const;
    bool has_phase(Phase p) const { return index_of(p) >= 0; }
};

struct Load {
    NodeRef node;
    double p = 0.0;
    double q = 0.0;
    bool operator==(const Load&) const = default;
};

struct PVUnit {
    std::string name;
    NodeRef node;
    double p_max = 0.0;
    double s_max = 0.0;
    bool has_vvc = false;
    /// Index into Feeder::loads of the demand at the PV's node, if any.
    std::optional<int> colocated_demand;
    bool operator==(const PVUnit&) const = default;
};

struct Substation {
    std::string bus;
    double v_pu = 1.0;
    /// Phase-A angle in radians; B and C follow at -120 and +120 degrees.
    double angle_a = 0.0;
    bool operator==(const Substation&) const = default;
};

struct Prices {
    double grid_per_mwh = 55.71;
    double pv_per_mwh = 21.79;
    bool operator==(const Prices&) const = default;
};

/// Immutable network description in per-unit.
class Feeder {
public:
    double mva_base = 1.0;
    double kv_base = 1.0;
    Prices prices;
    std::vector<Bus> buses;
    std::vector<LineBlock> lines;
    std::vector<Load> loads;
    std::vector<PVUnit> pv_units;
    Substation substation;

    /// Builds node indexing and checks every structural invariant.
    void finalize();

    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    const std::vector<NodeRef>& nodes() const { return nodes_; }
    const NodeRef& node(int i) const { return nodes_.at(static_cast<size_t>(i)); }
    int node_index(const NodeRef& n) const;
    int node_index(const std::string& bus, Phase p) const { return node_index(NodeRef{bus, p}); }
    int bus_index(const std::string& id) const;
    const Bus& bus_of(int node) const { return buses[static_cast<size_t>(node_bus_[static_cast<size_t>(node)])]; }

    bool is_substation_node(int node) const { return node_bus_[static_cast<size_t>(node)] == sub_bus_; }
    std::vector<int> substation_nodes() const;
    /// Fixed substation phasor for a substation node.
    std::complex<double> substation_voltage(int node) const;

    /// Total demand at each node.
    std::vector<std::complex<double>> node_demand() const;
    int num_vvc() const;

private:
    std::vector<NodeRef> nodes_;
    std::vector<int> node_bus_;
    std::map<std::pair<std::string, int>, int> node_lookup_;
    std::map<std::string, int> bus_lookup_;
    int sub_bus_ = -1;
};

bool operator==(const LineBlock& a, const LineBlock& b);
bool operator==(const Feeder& a, const Feeder& b);

/// Nominal angle of a phase: 0, -2pi/3, +2pi/3.
double nominal_angle(Phase p);

/// Parses a feeder JSON document. Throws ParseError on malformed JSON and
/// InputError on schema or topology problems.
Feeder parse_feeder(std::string_view text);
Feeder load_feeder(const std::string& path);
/// Writes the feeder in per-unit form; parse_feeder(serialize_feeder(f)) == f.
std::string serialize_feeder(const Feeder& f);

/// Stored admittance entry for a phase pair of a line.
std::pair<double, double> line_admittance(const LineBlock& line, Phase p, Phase q);

struct VoltageState {
    std::vector<double> mag;
    std::vector<double> ang;

    std::complex<double> phasor(int i) const {
        return std::polar(mag[static_cast<size_t>(i)], ang[static_cast<size_t>(i)]);
    }
    bool operator==(const VoltageState&) const = default;
};

VoltageState flat_start(const Feeder& f);

}  // namespace socpf
