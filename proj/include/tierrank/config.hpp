#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "tierrank/betr.hpp"
#include "tierrank/gateway.hpp"
#include "tierrank/rerank.hpp"
#include "tierrank/retrieval.hpp"

namespace tierrank {

struct GatewayConfig {
    std::string mode = "mock";  // "mock" or "http"
    std::string script_path;    // mock script JSON (optional)
    bool strict = false;
    std::size_t embedding_dim = 16;
    GatewayEndpoints endpoints;
    int retry_budget = 2;
};

struct PipelineConfig {
    std::string windows_path;
    std::string graph_path;
    std::string betr_params_path;
    std::string benchmark_path;
    std::string schema_path;

    FusionConfig fusion;
    RerankConfig rerank;
    BetrHyper betr;
    GatewayConfig gateway;
    GraphBuildOptions graph;

    std::uint64_t seed = 42;
    int ircot_max_iters = 0;  // 0 disables the retrieve-reflect loop
    int accessibility_top_k = 10;

    std::map<std::string, std::string> prompt_overrides;  // name -> file
};

// Flat `key = value` file (TOML-style: quoted strings, ints, floats,
// bools; '#' comments; optional [section] headers acting as key
// prefixes). Unknown keys raise ConfigError. Environment variables
// override file values: key `gateway.chat.url` reads GATEWAY_CHAT_URL.
PipelineConfig load_config(const std::string& path);
PipelineConfig default_config();

// Applies env-var overrides to an already-loaded config (load_config does
// this itself; exposed for tests).
void apply_env_overrides(PipelineConfig& config);

// Builds the configured gateway (mock or http) wrapped with the retry
// decorator.
std::shared_ptr<ModelGateway> make_gateway(const GatewayConfig& config);

}  // namespace tierrank
