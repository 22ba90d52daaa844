#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cw {

enum class DeviceClass : uint8_t {
    injection_machine,
    robot6ax,
    energy_analyzer,
    water_collector,
    precision_scale,
    ambient_sensor,
};

const char* device_class_name(DeviceClass d);
std::optional<DeviceClass> device_class_from(const std::string& name);
constexpr int kDeviceClassCount = 6;

enum class Dtype : uint8_t { f64, i64, boolean };

// One telemetry variable: the canonical name the platform uses plus the
// machine-native source name it arrives under.
struct ParameterSpec {
    std::string canonical_id;
    std::string source_name;
    DeviceClass device_class;
    std::string unit;
    Dtype dtype = Dtype::f64;
    double nominal_min = 0.0;
    double nominal_max = 1.0;
};

// Parameter vocabulary for one cell layout. Lookup by (source_name,
// device_class) is exact but case-insensitive on the source name.
class ParameterCatalog {
public:
    static ParameterCatalog load_file(const std::string& path);
    static ParameterCatalog parse_csv(const std::string& text, const std::string& origin = "<memory>");

    const std::vector<ParameterSpec>& params() const { return params_; }
    size_t size() const { return params_.size(); }
    const ParameterSpec& at(size_t idx) const { return params_[idx]; }

    // Index of param by canonical id; -1 if absent.
    int index_of(const std::string& canonical_id) const;

    // normalize: resolve a machine-native name to its spec. Throws
    // Errc::unknown_parameter when the catalog has no match; callers must
    // quarantine such samples rather than drop them.
    const ParameterSpec& normalize(const std::string& source_name, DeviceClass device) const;
    const ParameterSpec* try_normalize(const std::string& source_name, DeviceClass device) const;

    std::vector<int> indices_for_device(DeviceClass device) const;

private:
    void add(ParameterSpec spec, const std::string& origin, int line_no);

    std::vector<ParameterSpec> params_;
    std::unordered_map<std::string, int> by_canonical_;
    // key: lowercase(source_name) + '\x1f' + device class index
    std::unordered_map<std::string, int> by_source_;
};

// The 40-parameter demo catalog shipped with the repo (data/catalog_demo.csv
// holds the same content; tests keep the two in sync).
const std::string& demo_catalog_csv();
ParameterCatalog demo_catalog();

} // namespace cw
