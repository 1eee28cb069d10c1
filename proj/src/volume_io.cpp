#include "vtrace/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "vtrace/error.hpp"

namespace vtrace {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open payload '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
T byteswap_value(T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
}

// Decodes `count` scalars of type T stored with the given endianness.
template <typename T>
std::vector<float> decode(const std::vector<char>& bytes, std::size_t count, bool little_endian,
                          const std::string& what) {
    if (bytes.size() != count * sizeof(T)) {
        std::ostringstream os;
        os << "payload size mismatch in " << what << ": expected " << count << " values ("
           << count * sizeof(T) << " bytes), found " << bytes.size() << " bytes";
        throw DataError(os.str());
    }
    const bool swap = little_endian != (std::endian::native == std::endian::little);
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        T v;
        std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
        if (swap) v = byteswap_value(v);
        out[i] = static_cast<float>(v);
    }
    return out;
}

template <typename T>
void append_le(std::string& buf, T v) {
    if constexpr (std::endian::native != std::endian::little) v = byteswap_value(v);
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf.append(b, sizeof(T));
}

Vec3 vec3_from_json(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
        throw DataError(std::string("volume header field '") + key + "' must be a 3-element array");
    Vec3 v;
    for (int a = 0; a < 3; ++a) {
        if (!j[key][a].is_number())
            throw DataError(std::string("volume header field '") + key + "' must be numeric");
        v[a] = j[key][a].get<double>();
    }
    return v;
}

Grid grid_from_header(const json& h) {
    Grid g;
    if (!h.contains("dims") || !h["dims"].is_array() || h["dims"].size() != 3)
        throw DataError("volume header field 'dims' must be a 3-element array");
    for (int a = 0; a < 3; ++a) {
        if (!h["dims"][a].is_number_integer())
            throw DataError("volume header field 'dims' must hold integers");
        g.dims[a] = h["dims"][a].get<int>();
    }
    g.spacing = vec3_from_json(h, "spacing_mm");
    g.origin = h.contains("origin_mm") ? vec3_from_json(h, "origin_mm") : Vec3{};
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] < 2) throw DataError("volume header declares a dimension smaller than 2");
        if (!(g.spacing[a] > 0.0)) throw DataError("volume header declares non-positive spacing");
    }
    return g;
}

fs::path payload_path(const fs::path& header) {
    fs::path p = header;
    p.replace_extension(".raw");
    return p;
}

json parse_header(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw DataError("corrupt volume header '" + path.string() + "': " + e.what());
    }
}

Volume load_container(const fs::path& path) {
    const json h = parse_header(path);
    if (!h.is_object()) throw DataError("corrupt volume header '" + path.string() + "'");
    const Grid g = grid_from_header(h);
    const std::string dtype = h.value("dtype", "f32");
    const ValueKind kind = value_kind_from_string(h.value("value_kind", "raw-stored"));
    const auto bytes = read_bytes(payload_path(path));
    const std::string what = "'" + payload_path(path).string() + "'";
    std::vector<float> data;
    if (dtype == "f32")
        data = decode<float>(bytes, g.voxel_count(), true, what);
    else if (dtype == "i16")
        data = decode<std::int16_t>(bytes, g.voxel_count(), true, what);
    else
        throw DataError("unsupported dtype '" + dtype + "' in '" + path.string() + "'");
    Volume v(g, kind, std::move(data));
    v.check_invariants();
    return v;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Parses "(a,b,c) (d,e,f) ..." into vectors.
std::vector<Vec3> parse_nrrd_vectors(const std::string& s) {
    std::vector<Vec3> out;
    std::size_t pos = 0;
    while ((pos = s.find('(', pos)) != std::string::npos) {
        const auto end = s.find(')', pos);
        if (end == std::string::npos) throw DataError("malformed NRRD vector list: " + s);
        std::string body = s.substr(pos + 1, end - pos - 1);
        std::replace(body.begin(), body.end(), ',', ' ');
        std::istringstream is(body);
        Vec3 v;
        if (!(is >> v.x >> v.y >> v.z)) throw DataError("malformed NRRD vector: " + body);
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

}  // namespace

Volume load_volume(const fs::path& path) {
    const std::string ext = lower(path.extension().string());
    if (ext == ".nhdr") return load_nrrd(path);
    if (ext == ".json") return load_container(path);
    throw DataError("unrecognized volume file extension '" + ext + "' (expected .json or .nhdr)");
}

void save_volume(const fs::path& path, const Volume& v, StorageType type, const json& attributes) {
    if (path.extension() != ".json")
        throw UsageError("volume header path must end in .json: '" + path.string() + "'");
    const Grid& g = v.grid();
    json h;
    h["dims"] = {g.dims[0], g.dims[1], g.dims[2]};
    h["spacing_mm"] = {g.spacing.x, g.spacing.y, g.spacing.z};
    h["origin_mm"] = {g.origin.x, g.origin.y, g.origin.z};
    h["dtype"] = type == StorageType::f32 ? "f32" : "i16";
    h["value_kind"] = std::string(to_string(v.kind()));
    if (!attributes.is_null()) h["attributes"] = attributes;

    std::string payload;
    if (type == StorageType::f32) {
        payload.reserve(v.size() * sizeof(float));
        for (float x : v.data()) append_le(payload, x);
    } else {
        payload.reserve(v.size() * sizeof(std::int16_t));
        for (float x : v.data()) {
            const float r = std::nearbyint(x);
            if (!(r >= std::numeric_limits<std::int16_t>::min() &&
                  r <= std::numeric_limits<std::int16_t>::max()))
                throw DataError("value does not fit in i16 payload");
            append_le(payload, static_cast<std::int16_t>(r));
        }
    }

    std::ofstream hdr(path, std::ios::binary | std::ios::trunc);
    if (!hdr) throw DataError("cannot write '" + path.string() + "'");
    hdr << h.dump(2) << '\n';
    std::ofstream raw(payload_path(path), std::ios::binary | std::ios::trunc);
    if (!raw) throw DataError("cannot write '" + payload_path(path).string() + "'");
    raw.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!hdr || !raw) throw DataError("write failed for '" + path.string() + "'");
}

json read_volume_attributes(const fs::path& path) {
    const json h = parse_header(path);
    return h.contains("attributes") ? h["attributes"] : json(nullptr);
}

Volume load_nrrd(const fs::path& header_path) {
    std::istringstream in(read_text(header_path));
    std::string line;
    if (!std::getline(in, line) || line.rfind("NRRD", 0) != 0)
        throw DataError("'" + header_path.string() + "' is not a NRRD header");

    std::string type, endian = "little", encoding = "raw", data_file;
    int dimension = 0;
    Grid g;
    bool have_sizes = false, have_spacing = false;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") break;
        if (line[0] == '#') continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        const std::string key = lower(trim(line.substr(0, colon)));
        std::string value = line.substr(colon + 1);
        if (!value.empty() && value[0] == '=') value.erase(0, 1);  // key:=value form
        value = trim(value);
        if (key == "type") {
            type = lower(value);
        } else if (key == "dimension") {
            dimension = std::stoi(value);
        } else if (key == "sizes") {
            std::istringstream is(value);
            for (int a = 0; a < 3; ++a)
                if (!(is >> g.dims[a])) throw DataError("malformed NRRD sizes: " + value);
            have_sizes = true;
        } else if (key == "spacings") {
            std::istringstream is(value);
            for (int a = 0; a < 3; ++a)
                if (!(is >> g.spacing[a])) throw DataError("malformed NRRD spacings: " + value);
            have_spacing = true;
        } else if (key == "space directions") {
            const auto dirs = parse_nrrd_vectors(value);
            if (dirs.size() != 3) throw DataError("NRRD space directions must list 3 vectors");
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b)
                    if (a != b && dirs[a][b] != 0.0)
                        throw DataError("NRRD space directions must be diagonal");
                g.spacing[a] = dirs[a][a];
            }
            have_spacing = true;
        } else if (key == "space origin") {
            const auto o = parse_nrrd_vectors(value);
            if (o.size() != 1) throw DataError("malformed NRRD space origin");
            g.origin = o[0];
        } else if (key == "endian") {
            endian = lower(value);
        } else if (key == "encoding") {
            encoding = lower(value);
        } else if (key == "data file" || key == "datafile") {
            data_file = value;
        }
    }
    if (dimension != 3) throw DataError("NRRD import supports dimension 3 only");
    if (!have_sizes) throw DataError("NRRD header lacks sizes");
    if (!have_spacing) throw DataError("NRRD header lacks spacing information");
    if (encoding != "raw") throw DataError("NRRD encoding '" + encoding + "' is not supported");
    if (data_file.empty()) throw DataError("NRRD import requires a detached 'data file'");
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] < 2) throw DataError("NRRD sizes must be >= 2");
        if (!(g.spacing[a] > 0.0)) throw DataError("NRRD spacing must be positive");
    }

    fs::path data_path = data_file;
    if (data_path.is_relative()) data_path = header_path.parent_path() / data_path;
    const auto bytes = read_bytes(data_path);
    const bool little = endian != "big";
    const std::size_t n = g.voxel_count();
    const std::string what = "'" + data_path.string() + "'";
    std::vector<float> data;
    if (type == "float")
        data = decode<float>(bytes, n, little, what);
    else if (type == "short" || type == "int16" || type == "signed short" || type == "int16_t" ||
             type == "short int" || type == "signed short int")
        data = decode<std::int16_t>(bytes, n, little, what);
    else if (type == "ushort" || type == "uint16" || type == "unsigned short" ||
             type == "uint16_t" || type == "unsigned short int")
        data = decode<std::uint16_t>(bytes, n, little, what);
    else if (type == "uchar" || type == "uint8" || type == "unsigned char" || type == "uint8_t")
        data = decode<std::uint8_t>(bytes, n, little, what);
    else
        throw DataError("unsupported NRRD type '" + type + "'");
    return Volume(g, ValueKind::raw_stored, std::move(data));
}

}  // namespace vtrace
