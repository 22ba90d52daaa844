#include "model/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "util/error.hpp"

namespace cw {

const char* device_class_name(DeviceClass d) {
    switch (d) {
    case DeviceClass::injection_machine: return "injection_machine";
    case DeviceClass::robot6ax: return "robot6ax";
    case DeviceClass::energy_analyzer: return "energy_analyzer";
    case DeviceClass::water_collector: return "water_collector";
    case DeviceClass::precision_scale: return "precision_scale";
    case DeviceClass::ambient_sensor: return "ambient_sensor";
    }
    return "?";
}

std::optional<DeviceClass> device_class_from(const std::string& name) {
    for (int i = 0; i < kDeviceClassCount; ++i) {
        auto d = static_cast<DeviceClass>(i);
        if (name == device_class_name(d)) return d;
    }
    return std::nullopt;
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string source_key(const std::string& source_name, DeviceClass device) {
    return lower(source_name) + '\x1f' + static_cast<char>('0' + static_cast<int>(device));
}

Dtype parse_dtype(const std::string& s, const std::string& origin, int line_no) {
    if (s == "f64") return Dtype::f64;
    if (s == "i64") return Dtype::i64;
    if (s == "bool") return Dtype::boolean;
    raise(Errc::config, origin + ":" + std::to_string(line_no) + ": bad dtype '" + s + "'");
}

} // namespace

void ParameterCatalog::add(ParameterSpec spec, const std::string& origin, int line_no) {
    auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };
    if (spec.canonical_id.empty() || spec.source_name.empty())
        raise(Errc::config, where() + "empty parameter name");
    if (!(spec.nominal_min < spec.nominal_max))
        raise(Errc::config, where() + "nominal_min must be < nominal_max for " + spec.canonical_id);
    if (spec.dtype == Dtype::boolean && (spec.nominal_min != 0.0 || spec.nominal_max != 1.0))
        raise(Errc::config, where() + "bool parameter must have range {0,1}: " + spec.canonical_id);
    if (by_canonical_.count(spec.canonical_id))
        raise(Errc::config, where() + "duplicate canonical_id " + spec.canonical_id);
    std::string skey = source_key(spec.source_name, spec.device_class);
    if (by_source_.count(skey))
        raise(Errc::config, where() + "duplicate (source_name, device_class) for " + spec.source_name);
    int idx = static_cast<int>(params_.size());
    by_canonical_[spec.canonical_id] = idx;
    by_source_[skey] = idx;
    params_.push_back(std::move(spec));
}

ParameterCatalog ParameterCatalog::parse_csv(const std::string& text, const std::string& origin) {
    ParameterCatalog cat;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        if (!header_seen) {
            header_seen = true; // header row: canonical_id,source_name,...
            continue;
        }
        std::vector<std::string> cols;
        std::string col;
        std::istringstream ls(line);
        while (std::getline(ls, col, ',')) cols.push_back(col);
        if (cols.size() != 7)
            raise(Errc::config, origin + ":" + std::to_string(line_no) + ": expected 7 columns, got " +
                                    std::to_string(cols.size()));
        ParameterSpec spec;
        spec.canonical_id = cols[0];
        spec.source_name = cols[1];
        auto dev = device_class_from(cols[2]);
        if (!dev)
            raise(Errc::config, origin + ":" + std::to_string(line_no) + ": unknown device class '" + cols[2] + "'");
        spec.device_class = *dev;
        spec.unit = cols[3];
        spec.dtype = parse_dtype(cols[4], origin, line_no);
        try {
            spec.nominal_min = std::stod(cols[5]);
            spec.nominal_max = std::stod(cols[6]);
        } catch (const std::exception&) {
            raise(Errc::config, origin + ":" + std::to_string(line_no) + ": bad numeric range");
        }
        cat.add(std::move(spec), origin, line_no);
    }
    if (cat.params_.empty()) raise(Errc::config, origin + ": catalog has no parameters");
    return cat;
}

ParameterCatalog ParameterCatalog::load_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) raise(Errc::config, "cannot open catalog file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str(), path);
}

int ParameterCatalog::index_of(const std::string& canonical_id) const {
    auto it = by_canonical_.find(canonical_id);
    return it == by_canonical_.end() ? -1 : it->second;
}

const ParameterSpec* ParameterCatalog::try_normalize(const std::string& source_name, DeviceClass device) const {
    auto it = by_source_.find(source_key(source_name, device));
    return it == by_source_.end() ? nullptr : &params_[it->second];
}

const ParameterSpec& ParameterCatalog::normalize(const std::string& source_name, DeviceClass device) const {
    const ParameterSpec* spec = try_normalize(source_name, device);
    if (!spec)
        raise(Errc::unknown_parameter,
              "unknown parameter '" + source_name + "' on " + device_class_name(device));
    return *spec;
}

std::vector<int> ParameterCatalog::indices_for_device(DeviceClass device) const {
    std::vector<int> out;
    for (size_t i = 0; i < params_.size(); ++i)
        if (params_[i].device_class == device) out.push_back(static_cast<int>(i));
    return out;
}

const std::string& demo_catalog_csv() {
    static const std::string csv = R"(# Demo parameter catalog: one injection cell, 40 variables.
# canonical_id,source_name,device_class,unit,dtype,min,max
canonical_id,source_name,device_class,unit,dtype,min,max
inj.melt_temp,ActSimPara1,injection_machine,C,f64,180,280
inj.nozzle_temp,ActTmpNozzle,injection_machine,C,f64,180,280
inj.barrel_temp_z1,ActTmpBarrel1,injection_machine,C,f64,170,270
inj.barrel_temp_z2,ActTmpBarrel2,injection_machine,C,f64,170,270
inj.barrel_temp_z3,ActTmpBarrel3,injection_machine,C,f64,170,270
inj.feed_temp,ActTmpFeed,injection_machine,C,f64,20,80
inj.mold_temp_a,ActTmpMoldA,injection_machine,C,f64,15,90
inj.mold_temp_b,ActTmpMoldB,injection_machine,C,f64,15,90
inj.oil_temp,ActTmpOil,injection_machine,C,f64,20,75
inj.inj_pressure,ActPrsInj,injection_machine,bar,f64,0,1800
inj.hold_pressure,ActPrsHold,injection_machine,bar,f64,0,1200
inj.back_pressure,ActPrsBack,injection_machine,bar,f64,0,300
inj.peak_pressure,ActPrsMax,injection_machine,bar,f64,0,2000
inj.screw_pos,ActPosScrew,injection_machine,mm,f64,0,250
inj.screw_rpm,ActSpdScrew,injection_machine,rpm,f64,0,400
inj.inj_speed,ActSpdInj,injection_machine,mm_s,f64,0,220
inj.clamp_force,ActFrcClamp,injection_machine,kN,f64,0,5000
inj.inj_time,ActTimInj,injection_machine,s,f64,0,10
inj.cool_time,ActTimCool,injection_machine,s,f64,0,60
inj.plast_time,ActTimPlast,injection_machine,s,f64,0,30
inj.cushion,ActVolCushion,injection_machine,mm,f64,0,30
inj.shot_volume,ActVolShot,injection_machine,cm3,f64,0,500
inj.cycle_flag,ActStrCycle,injection_machine,flag,bool,0,1
rob.axis1_torque,RbtTrqAx1,robot6ax,Nm,f64,-200,200
rob.axis2_torque,RbtTrqAx2,robot6ax,Nm,f64,-200,200
rob.axis3_torque,RbtTrqAx3,robot6ax,Nm,f64,-200,200
rob.axis4_torque,RbtTrqAx4,robot6ax,Nm,f64,-120,120
rob.axis5_torque,RbtTrqAx5,robot6ax,Nm,f64,-120,120
rob.axis6_torque,RbtTrqAx6,robot6ax,Nm,f64,-80,80
energy.cum_kwh,EnerCumKWh,energy_analyzer,kWh,f64,0,1000000000
energy.power_kw,EnerPwrKW,energy_analyzer,kW,f64,0,150
energy.current_a,EnerCurA,energy_analyzer,A,f64,0,250
energy.voltage_v,EnerVltV,energy_analyzer,V,f64,360,440
water.flow_lpm,WtrFlowLpm,water_collector,L_min,f64,0,120
water.temp_in,WtrTmpIn,water_collector,C,f64,5,45
water.temp_out,WtrTmpOut,water_collector,C,f64,5,70
water.pressure_bar,WtrPrsBar,water_collector,bar,f64,0,10
scale.part_mass_g,SclMassG,precision_scale,g,f64,0,2000
amb.humidity_pct,AmbHumPct,ambient_sensor,pct,f64,0,100
amb.temp_c,AmbTmpC,ambient_sensor,C,f64,5,45
)";
    return csv;
}

ParameterCatalog demo_catalog() { return ParameterCatalog::parse_csv(demo_catalog_csv(), "<demo>"); }

} // namespace cw
