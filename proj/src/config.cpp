#include "tierrank/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>

namespace tierrank {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 &&
        ((s.front() == '"' && s.back() == '"') ||
         (s.front() == '\'' && s.back() == '\''))) {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

int to_int(const std::string& key, const std::string& value) {
    try {
        return std::stoi(value);
    } catch (const std::exception&) {
        throw ConfigError("expected integer for '" + key + "', got '" + value +
                          "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        return std::stod(value);
    } catch (const std::exception&) {
        throw ConfigError("expected number for '" + key + "', got '" + value +
                          "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("expected boolean for '" + key + "', got '" + value +
                      "'");
}

using Setter = std::function<void(PipelineConfig&, const std::string&,
                                  const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> kSetters = {
        {"paths.windows",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.windows_path = v;
         }},
        {"paths.graph",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.graph_path = v;
         }},
        {"paths.betr_params",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.betr_params_path = v;
         }},
        {"paths.benchmark",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.benchmark_path = v;
         }},
        {"paths.schema",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.schema_path = v;
         }},
        {"fusion.rrf_k",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.fusion.rrf_k = to_int(k, v);
         }},
        {"fusion.dense_top_k",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.fusion.dense_top_k = to_int(k, v);
         }},
        {"fusion.graph_top_k",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.fusion.graph_top_k = to_int(k, v);
         }},
        {"fusion.hyde_passages",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.fusion.hyde_passages = to_int(k, v);
         }},
        {"fusion.hyde_temperature",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.fusion.hyde_temperature = to_double(k, v);
         }},
        {"fusion.hyde_top_k",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.fusion.hyde_top_k = to_int(k, v);
         }},
        {"rerank.coarse_top_k",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.rerank.coarse_top_k = to_int(k, v);
         }},
        {"rerank.final_top_k",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.rerank.final_top_k = to_int(k, v);
         }},
        {"rerank.quota_margin",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.rerank.quota_margin = to_double(k, v);
         }},
        {"rerank.betr_at_merge",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.rerank.betr_at_merge = to_bool(k, v);
         }},
        {"betr.tau",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.betr.tau = to_double(k, v);
         }},
        {"betr.sigma_a",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.betr.sigma_a = to_double(k, v);
         }},
        {"betr.k",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.betr.negatives_per_positive = to_int(k, v);
         }},
        {"betr.learning_rate",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.betr.learning_rate = to_double(k, v);
         }},
        {"betr.epochs",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.betr.epochs = to_int(k, v);
         }},
        {"betr.patience",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.betr.patience = to_int(k, v);
         }},
        {"gateway.mode",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             if (v != "mock" && v != "http") {
                 throw ConfigError("gateway.mode must be mock|http, got '" + v +
                                   "'");
             }
             c.gateway.mode = v;
         }},
        {"gateway.script",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.gateway.script_path = v;
         }},
        {"gateway.strict",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.gateway.strict = to_bool(k, v);
         }},
        {"gateway.embedding_dim",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.gateway.embedding_dim =
                 static_cast<std::size_t>(to_int(k, v));
         }},
        {"gateway.model",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.gateway.endpoints.model = v;
         }},
        {"gateway.chat.url",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.gateway.endpoints.chat_url = v;
         }},
        {"gateway.embed.url",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.gateway.endpoints.embed_url = v;
         }},
        {"gateway.token_embed.url",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.gateway.endpoints.token_embed_url = v;
         }},
        {"gateway.cross.url",
         [](PipelineConfig& c, const std::string&, const std::string& v) {
             c.gateway.endpoints.cross_url = v;
         }},
        {"gateway.timeout_ms",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.gateway.endpoints.timeout_ms = to_int(k, v);
         }},
        {"gateway.max_inflight",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.gateway.endpoints.max_inflight = to_int(k, v);
         }},
        {"gateway.retry_budget",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.gateway.retry_budget = to_int(k, v);
         }},
        {"graph.lambda",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.graph.lambda = to_double(k, v);
         }},
        {"graph.epsilon",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.graph.epsilon = to_double(k, v);
         }},
        {"graph.max_rounds",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.graph.max_rounds = to_int(k, v);
         }},
        {"graph.mu",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.graph.mu = to_double(k, v);
         }},
        {"graph.schema_expansion",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.graph.schema_expansion = to_bool(k, v);
         }},
        {"graph.keywords_per_community",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.graph.keywords_per_community = to_int(k, v);
         }},
        {"seed",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.seed = static_cast<std::uint64_t>(to_int(k, v));
             c.betr.seed = c.seed;
         }},
        {"ircot.max_iters",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.ircot_max_iters = to_int(k, v);
         }},
        {"eval.accessibility_top_k",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.accessibility_top_k = to_int(k, v);
         }},
    };
    return kSetters;
}

void apply_key(PipelineConfig& config, const std::string& key,
               const std::string& value) {
    if (key.rfind("prompts.", 0) == 0) {
        config.prompt_overrides[key.substr(8)] = value;
        return;
    }
    auto it = setters().find(key);
    if (it == setters().end()) {
        throw ConfigError("unknown config key: " + key);
    }
    it->second(config, key, value);
}

std::string env_name(const std::string& key) {
    std::string out;
    out.reserve(key.size());
    for (char c : key) {
        out.push_back(c == '.' ? '_'
                               : static_cast<char>(std::toupper(
                                     static_cast<unsigned char>(c))));
    }
    return out;
}

}  // namespace

PipelineConfig default_config() { return PipelineConfig{}; }

void apply_env_overrides(PipelineConfig& config) {
    for (const auto& [key, _] : setters()) {
        if (const char* value = std::getenv(env_name(key).c_str())) {
            apply_key(config, key, value);
        }
    }
}

PipelineConfig load_config(const std::string& path) {
    PipelineConfig config;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto comment = line.find('#');
            if (comment != std::string::npos) line = line.substr(0, comment);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[' && line.back() == ']') {
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  " is not 'key = value': " + line);
            }
            std::string key = trim(line.substr(0, eq));
            const std::string value = unquote(trim(line.substr(eq + 1)));
            if (!section.empty()) key = section + "." + key;
            apply_key(config, key, value);
        }
    }
    apply_env_overrides(config);
    return config;
}

std::shared_ptr<ModelGateway> make_gateway(const GatewayConfig& config) {
    std::shared_ptr<ModelGateway> inner;
    if (config.mode == "mock") {
        MockScript script;
        if (!config.script_path.empty()) {
            script = MockScript::load(config.script_path);
        } else {
            script.strict = config.strict;
            script.embedding_dim = config.embedding_dim;
        }
        inner = std::make_shared<MockGateway>(std::move(script));
    } else if (config.mode == "http") {
        inner = std::make_shared<HttpGateway>(config.endpoints);
    } else {
        throw ConfigError("unknown gateway mode: " + config.mode);
    }
    return std::make_shared<RetryingGateway>(std::move(inner),
                                             config.retry_budget);
}

}  // namespace tierrank
