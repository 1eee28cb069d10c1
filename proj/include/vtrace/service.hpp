#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vtrace/volume.hpp"

namespace httplib {
class Server;
}

namespace vtrace {

/// 8-bit grayscale slice, row-major.
struct SliceImage {
    int width{0};
    int height{0};
    std::vector<std::uint8_t> pixels;
};

/// Renders slice `index` orthogonal to `axis` (0 = x, 1 = y, 2 = z).
///
/// Raw-stored volumes go through the HU window map; other kinds are taken as
/// unit values, windowed in unit space when `unit_window` is given. Image
/// columns follow the lower remaining axis, rows the higher one (an axial z
/// slice has x across and y down). Throws DataError for an out-of-range index.
SliceImage render_slice(const Volume& v, int axis, int index, const WindowParams& hu_window,
                        std::optional<std::pair<double, double>> unit_window = std::nullopt);

struct ServiceOptions {
    std::string host{"127.0.0.1"};
    int port{8080};
    /// Directory served at "/" (the browser viewer), optional.
    std::optional<std::filesystem::path> static_dir;
    /// Extraction runs executing concurrently.
    unsigned workers{1};
};

/// HTTP facade over the extraction pipeline.
///
///   POST /volumes                      -> {"id", dims, spacing_mm, origin_mm, layers}
///   GET  /volumes/{id}                 -> session metadata
///   GET  /volumes/{id}/slice?axis&index&wc&ww&layer -> image/png
///   POST /volumes/{id}/seeds           -> {"seed_set_id"}
///   GET  /volumes/{id}/seeds/{sid}     -> landmark JSON
///   POST /runs                         -> {"run_id"}
///   GET  /runs/{id}                    -> {"status", "result" | "error"}
///
/// Sessions live in memory only. Unknown sessions/runs answer 404, malformed
/// bodies 400, out-of-bounds seeds or slice indices 422.
class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds to options.host. With port 0 an ephemeral port is chosen; the
    /// bound port is returned.
    int bind();
    /// Blocks serving requests until stop() is called.
    void serve();
    void stop();

    httplib::Server& server();

private:
    class Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vtrace
