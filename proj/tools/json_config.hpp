#pragma once

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace vtrace::cli {

/// CLI11 configuration reader for JSON run files.
///
/// Objects nest by subcommand: {"track": {"step": 0.5, "seed": [1, 2, 3]}}
/// sets `vtrace track --step 0.5 --seed 1,2,3` unless the command line gives
/// those flags itself. Arrays become repeated inputs; booleans become flags.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        nlohmann::json doc = nlohmann::json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
            const std::string name = opt->get_lnames().front();
            if (opt->count() > 0)
                doc[name] = opt->as<std::string>();
            else if (default_also && !opt->get_default_str().empty())
                doc[name] = opt->get_default_str();
        }
        return doc.dump(2) + "\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json doc;
        try {
            input >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConversionError(std::string("invalid JSON configuration: ") + e.what());
        }
        std::vector<CLI::ConfigItem> items;
        flatten(doc, {}, items);
        return items;
    }

private:
    static std::string scalar(const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        std::ostringstream os;
        os << v;
        return os.str();
    }

    static void flatten(const nlohmann::json& node, const std::vector<std::string>& parents,
                        std::vector<CLI::ConfigItem>& out) {
        if (!node.is_object()) throw CLI::ConversionError("JSON configuration must be an object");
        for (const auto& [key, value] : node.items()) {
            if (value.is_object()) {
                auto next = parents;
                next.push_back(key);
                flatten(value, next, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (const auto& e : value) item.inputs.push_back(scalar(e));
            else
                item.inputs.push_back(scalar(value));
            out.push_back(std::move(item));
        }
    }
};

}  // namespace vtrace::cli
