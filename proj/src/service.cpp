#include "vtrace/service.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "vtrace/error.hpp"
#include "vtrace/metrics.hpp"
#include "vtrace/pipeline.hpp"
#include "vtrace/png_writer.hpp"
#include "vtrace/volume_io.hpp"

namespace vtrace {

using nlohmann::json;

SliceImage render_slice(const Volume& v, int axis, int index, const WindowParams& hu_window,
                        std::optional<std::pair<double, double>> unit_window) {
    if (axis < 0 || axis > 2) throw UsageError("slice axis must be x, y or z");
    const auto& d = v.dims();
    if (index < 0 || index >= d[axis]) throw DataError("slice index out of range");
    const int col_axis = axis == 0 ? 1 : 0;
    const int row_axis = axis == 2 ? 1 : 2;
    SliceImage img;
    img.width = d[col_axis];
    img.height = d[row_axis];
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    const bool raw = v.kind() == ValueKind::raw_stored || v.kind() == ValueKind::hounsfield;
    WindowParams w = hu_window;
    if (v.kind() == ValueKind::hounsfield) {
        w.rescale_slope = 1.0;
        w.rescale_intercept = 0.0;
    }
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            int ijk[3];
            ijk[axis] = index;
            ijk[col_axis] = c;
            ijk[row_axis] = r;
            const double value = v.at(ijk[0], ijk[1], ijk[2]);
            double t;
            if (raw) {
                t = normalize_hu_value(value, w);
            } else if (unit_window) {
                const auto [center, width] = *unit_window;
                t = std::clamp((value - (center - 0.5 * width)) / width, 0.0, 1.0);
            } else {
                t = std::clamp(value, 0.0, 1.0);
            }
            img.pixels[static_cast<std::size_t>(r) * img.width + c] = static_cast<std::uint8_t>(std::lround(255.0 * t));
        }
    }
    return img;
}

namespace {

struct HttpError {
    int status;
    std::string message;
};

std::string base64_decode(const std::string& in) {
    static const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    int val = 0, bits = -8;
    for (unsigned char ch : in) {
        if (ch == '=' ) break;
        if (std::isspace(ch)) continue;
        const auto pos = alphabet.find(static_cast<char>(ch));
        if (pos == std::string::npos) throw HttpError{400, "invalid base64 payload"};
        val = (val << 6) + static_cast<int>(pos);
        bits += 6;
        if (bits >= 0) {
            out.push_back(static_cast<char>((val >> bits) & 0xFF));
            bits -= 8;
        }
    }
    return out;
}

struct Session {
    std::string id;
    std::map<std::string, std::shared_ptr<const Volume>> layers;  // raw, normalized, vesselness, fascia
    std::map<std::string, LandmarkSet> seed_sets;
    int next_seed_set{1};

    const Grid& grid() const { return layers.begin()->second->grid(); }
    std::shared_ptr<const Volume> layer(const std::string& name) const {
        auto it = layers.find(name);
        return it == layers.end() ? nullptr : it->second;
    }
};

struct Run {
    std::string status{"pending"};
    json result;
    std::string error;
};

void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(dump_json(body), "application/json");
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw HttpError{400, std::string("malformed JSON body: ") + e.what()};
    }
}

Vec3 vec3_param(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
        throw HttpError{400, std::string(what) + " must be [x, y, z]"};
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

class Service::Impl {
public:
    explicit Impl(ServiceOptions options) : options_(std::move(options)) {
        routes();
        for (unsigned i = 0; i < std::max(1u, options_.workers); ++i) workers_.emplace_back([this] { work(); });
    }

    ~Impl() {
        {
            std::lock_guard lock(queue_mutex_);
            shutting_down_ = true;
        }
        queue_cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    httplib::Server server;
    ServiceOptions options_;

private:
    void routes() {
        if (options_.static_dir) server.set_mount_point("/", options_.static_dir->string());
        server.Post("/volumes", guarded([this](const auto& req, auto& res) { post_volume(req, res); }));
        server.Get(R"(/volumes/([^/]+))", guarded([this](const auto& req, auto& res) { get_volume(req, res); }));
        server.Get(R"(/volumes/([^/]+)/slice)", guarded([this](const auto& req, auto& res) { get_slice(req, res); }));
        server.Post(R"(/volumes/([^/]+)/seeds)", guarded([this](const auto& req, auto& res) { post_seeds(req, res); }));
        server.Get(R"(/volumes/([^/]+)/seeds/([^/]+))",
                   guarded([this](const auto& req, auto& res) { get_seeds(req, res); }));
        server.Post("/runs", guarded([this](const auto& req, auto& res) { post_run(req, res); }));
        server.Get(R"(/runs/([^/]+))", guarded([this](const auto& req, auto& res) { get_run(req, res); }));
    }

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    static Handler guarded(Handler inner) {
        return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
            try {
                inner(req, res);
            } catch (const HttpError& e) {
                reply_json(res, e.status, {{"error", e.message}});
            } catch (const UsageError& e) {
                reply_json(res, 400, {{"error", e.what()}});
            } catch (const DataError& e) {
                reply_json(res, 400, {{"error", e.what()}});
            } catch (const std::exception& e) {
                reply_json(res, 500, {{"error", e.what()}});
            }
        };
    }

    std::shared_ptr<Session> session(const std::string& id) {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw HttpError{404, "unknown session '" + id + "'"};
        return it->second;
    }

    static json session_json(const Session& s) {
        const Grid& g = s.grid();
        json layers = json::array();
        for (const auto& [name, _] : s.layers) layers.push_back(name);
        json seeds = json::array();
        for (const auto& [sid, _] : s.seed_sets) seeds.push_back(sid);
        return {{"id", s.id},
                {"dims", {g.dims[0], g.dims[1], g.dims[2]}},
                {"spacing_mm", {g.spacing.x, g.spacing.y, g.spacing.z}},
                {"origin_mm", {g.origin.x, g.origin.y, g.origin.z}},
                {"layers", layers},
                {"seed_sets", seeds}};
    }

    static std::shared_ptr<const Volume> upload_volume(const json& up) {
        if (!up.is_object() || !up.contains("header") || !up.contains("payload_base64"))
            throw HttpError{400, "upload needs 'header' and 'payload_base64'"};
        const json& h = up["header"];
        try {
            Grid g;
            for (int a = 0; a < 3; ++a) g.dims[a] = h.at("dims").at(a).get<int>();
            g.spacing = vec3_param(h.at("spacing_mm"), "spacing_mm");
            if (h.contains("origin_mm")) g.origin = vec3_param(h["origin_mm"], "origin_mm");
            g.validate();
            if (h.value("dtype", "f32") != "f32") throw HttpError{400, "uploads must use dtype f32"};
            const std::string bytes = base64_decode(up["payload_base64"].get<std::string>());
            if (bytes.size() != g.voxel_count() * sizeof(float))
                throw HttpError{400, "payload size mismatch"};
            std::vector<float> data(g.voxel_count());
            std::memcpy(data.data(), bytes.data(), bytes.size());
            return std::make_shared<Volume>(g, value_kind_from_string(h.value("value_kind", "raw-stored")),
                                            std::move(data));
        } catch (const json::exception& e) {
            throw HttpError{400, std::string("malformed upload header: ") + e.what()};
        }
    }

    void post_volume(const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.is_object()) throw HttpError{400, "expected a JSON object"};
        auto s = std::make_shared<Session>();
        for (const char* role : {"raw", "normalized", "vesselness", "fascia"}) {
            if (!body.contains(role)) continue;
            if (!body[role].is_string()) throw HttpError{400, std::string(role) + " must be a file path"};
            s->layers[role] = std::make_shared<Volume>(load_volume(body[role].get<std::string>()));
        }
        if (body.contains("upload")) {
            const std::string role = body.value("role", "raw");
            if (role != "raw" && role != "normalized" && role != "vesselness" && role != "fascia")
                throw HttpError{400, "unknown volume role '" + role + "'"};
            s->layers[role] = upload_volume(body["upload"]);
        }
        if (s->layers.empty()) throw HttpError{400, "no volume given (raw, normalized, vesselness, fascia or upload)"};
        for (const auto& [name, vol] : s->layers)
            if (!vol->same_geometry(*s->layers.begin()->second))
                throw HttpError{400, "session volumes must share geometry ('" + name + "' differs)"};
        {
            std::lock_guard lock(mutex_);
            s->id = "s" + std::to_string(next_session_++);
            sessions_[s->id] = s;
        }
        reply_json(res, 201, session_json(*s));
    }

    void get_volume(const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        std::lock_guard lock(mutex_);
        reply_json(res, 200, session_json(*s));
    }

    void get_slice(const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        const std::string axis_name = req.has_param("axis") ? req.get_param_value("axis") : "z";
        int axis;
        if (axis_name == "x") axis = 0;
        else if (axis_name == "y") axis = 1;
        else if (axis_name == "z") axis = 2;
        else throw HttpError{400, "axis must be x, y or z"};
        if (!req.has_param("index")) throw HttpError{400, "missing slice index"};
        int index;
        std::optional<double> wc, ww;
        try {
            index = std::stoi(req.get_param_value("index"));
            if (req.has_param("wc")) wc = std::stod(req.get_param_value("wc"));
            if (req.has_param("ww")) ww = std::stod(req.get_param_value("ww"));
        } catch (const std::exception&) {
            throw HttpError{400, "slice parameters must be numeric"};
        }
        std::string layer = req.has_param("layer") ? req.get_param_value("layer") : "";
        if (layer.empty()) {
            for (const char* l : {"raw", "normalized", "vesselness", "fascia"})
                if (s->layer(l)) {
                    layer = l;
                    break;
                }
        }
        auto vol = s->layer(layer);
        if (!vol) throw HttpError{404, "session has no layer '" + layer + "'"};
        if (index < 0 || index >= vol->dims()[axis]) throw HttpError{422, "slice index out of range"};

        WindowParams w;
        if (wc) w.window_center = *wc;
        if (ww) w.window_width = *ww;
        if (!(w.window_width > 0.0)) throw HttpError{400, "window width must be positive"};
        std::optional<std::pair<double, double>> unit_window;
        if (wc && ww) unit_window = std::make_pair(*wc, *ww);
        const SliceImage img = render_slice(*vol, axis, index, w, unit_window);
        res.status = 200;
        res.set_content(encode_png_gray8(img.width, img.height, img.pixels), "image/png");
    }

    void post_seeds(const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        LandmarkSet set;
        try {
            set = landmarks_from_json(parse_body(req));
        } catch (const DataError& e) {
            throw HttpError{400, e.what()};
        }
        for (const auto& p : set.points)
            if (!s->grid().contains(p)) throw HttpError{422, "seed outside the volume bounds"};
        std::string sid;
        {
            std::lock_guard lock(mutex_);
            sid = "k" + std::to_string(s->next_seed_set++);
            s->seed_sets[sid] = set;
        }
        reply_json(res, 201, {{"seed_set_id", sid}});
    }

    void get_seeds(const httplib::Request& req, httplib::Response& res) {
        auto s = session(req.matches[1]);
        std::lock_guard lock(mutex_);
        auto it = s->seed_sets.find(req.matches[2]);
        if (it == s->seed_sets.end()) throw HttpError{404, "unknown seed set"};
        reply_json(res, 200, to_json(it->second));
    }

    void post_run(const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.is_object() || !body.contains("session") || !body["session"].is_string())
            throw HttpError{400, "run needs a 'session'"};
        auto s = session(body["session"].get<std::string>());
        const std::string mode = body.value("mode", "");
        if (mode != "track" && mode != "minpath") throw HttpError{400, "mode must be track or minpath"};
        LandmarkSet seeds;
        {
            std::lock_guard lock(mutex_);
            const std::string sid = body.value("seed_set", "");
            auto it = s->seed_sets.find(sid);
            if (it == s->seed_sets.end()) throw HttpError{404, "unknown seed set '" + sid + "'"};
            seeds = it->second;
        }
        const json params = body.value("params", json::object());
        if (!params.is_object()) throw HttpError{400, "params must be an object"};

        std::function<json()> job;
        if (mode == "track") {
            auto vess = s->layer("vesselness");
            if (!vess) throw HttpError{400, "track needs a vesselness layer"};
            auto intensity = s->layer("normalized") ? s->layer("normalized") : vess;
            auto fascia = params.value("use_fascia", true) ? s->layer("fascia") : nullptr;
            pipeline::TrackRequest tr;
            tr.seed = seeds.points[0];
            if (seeds.points.size() > 1) tr.toward = seeds.points[1];
            if (params.contains("direction")) tr.direction = vec3_param(params["direction"], "direction");
            tr.config = tracker_config_from_json(params.value("tracker", json(nullptr)));
            job = [vess, intensity, fascia, tr] {
                return pipeline::track_document(pipeline::run_track(*vess, *intensity, fascia.get(), tr));
            };
        } else {
            auto vess = s->layer("vesselness");
            auto intensity = s->layer("normalized");
            if (!vess || !intensity) throw HttpError{400, "minpath needs vesselness and normalized layers"};
            if (seeds.points.size() < 2) throw HttpError{400, "minpath needs start and goal seeds"};
            pipeline::MinpathRequest mr;
            mr.start = seeds.points[0];
            mr.goal = seeds.points[1];
            mr.sigmoid = sigmoid_params_from_json(params.value("sigmoid", json(nullptr)));
            mr.smooth = params.value("smooth", true);
            const bool timing = params.value("include_timing", true);
            job = [vess, intensity, mr, timing] {
                return pipeline::minpath_document(pipeline::run_minpath(*vess, *intensity, mr), timing);
            };
        }
        std::string rid;
        {
            std::lock_guard lock(mutex_);
            rid = "r" + std::to_string(next_run_++);
            runs_[rid] = Run{};
        }
        {
            std::lock_guard lock(queue_mutex_);
            queue_.emplace_back(rid, std::move(job));
        }
        queue_cv_.notify_one();
        reply_json(res, 202, {{"run_id", rid}, {"status", "pending"}});
    }

    void get_run(const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mutex_);
        auto it = runs_.find(req.matches[1]);
        if (it == runs_.end()) throw HttpError{404, "unknown run"};
        json body = {{"run_id", it->first}, {"status", it->second.status}};
        if (it->second.status == "done") body["result"] = it->second.result;
        if (it->second.status == "error") body["error"] = it->second.error;
        reply_json(res, 200, body);
    }

    void work() {
        for (;;) {
            std::pair<std::string, std::function<json()>> item;
            {
                std::unique_lock lock(queue_mutex_);
                queue_cv_.wait(lock, [this] { return shutting_down_ || !queue_.empty(); });
                if (queue_.empty()) return;
                item = std::move(queue_.front());
                queue_.pop_front();
            }
            Run done;
            try {
                done.result = item.second();
                done.status = "done";
            } catch (const std::exception& e) {
                done.status = "error";
                done.error = e.what();
            }
            std::lock_guard lock(mutex_);
            runs_[item.first] = std::move(done);
        }
    }

    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, Run> runs_;
    int next_session_{1};
    int next_run_{1};

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<std::pair<std::string, std::function<json()>>> queue_;
    bool shutting_down_{false};
    std::vector<std::thread> workers_;
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() = default;

int Service::bind() {
    auto& o = impl_->options_;
    if (o.port == 0) return impl_->server.bind_to_any_port(o.host);
    if (!impl_->server.bind_to_port(o.host, o.port))
        throw DataError("cannot bind " + o.host + ":" + std::to_string(o.port));
    return o.port;
}

void Service::serve() { impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

httplib::Server& Service::server() { return impl_->server; }

}  // namespace vtrace
