#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tierrank/errors.hpp"

namespace tierrank {

// Per-token embeddings for one text (query or window).
struct TokenEmbeddingMatrix {
    std::string source_id;
    std::vector<std::vector<double>> rows;  // one row per token, equal dim

    std::size_t dim() const { return rows.empty() ? 0 : rows.front().size(); }
};

// Uniform client contract for external model services. All pipeline code
// talks to models through this interface so every algorithmic component
// can run offline against the scripted mock.
class ModelGateway {
public:
    virtual ~ModelGateway() = default;

    // Single chat completion. Throws TransportError on transport failure.
    virtual std::string complete(const std::string& prompt, double temperature,
                                 std::optional<std::uint64_t> seed = {}) = 0;

    // One vector per input text, fixed dimension across the batch.
    virtual std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) = 0;

    // Token-level embeddings; at least one row for non-empty text.
    virtual TokenEmbeddingMatrix embed_tokens(const std::string& text) = 0;

    // Cross-encoder relevance logit for (query, passage).
    virtual double cross_score(const std::string& query,
                               const std::string& passage) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock

// Deterministic bag-of-hashed-tokens embedding, L2-normalized. Signed
// hashing so unrelated texts are not forced into the positive orthant.
std::vector<double> hash_embed(const std::string& text, std::size_t dim);
std::vector<std::vector<double>> hash_embed_tokens(const std::string& text,
                                                   std::size_t dim);

struct MockScript {
    struct CompleteRule {
        std::string match;     // substring of the prompt; empty matches all
        std::string response;
        int fail_times = 0;    // raise TransportError this many times first
        int max_uses = -1;     // -1 unlimited; exhausted rules are skipped
    };
    struct CrossRule {
        std::string query_match;
        std::string passage_match;
        double score = 0.0;
        int fail_times = 0;
    };

    bool strict = false;       // unmatched complete/cross requests -> ScriptError
    std::size_t embedding_dim = 16;
    std::vector<CompleteRule> complete_rules;  // ordered, first match wins
    std::map<std::string, std::vector<double>> embeddings;  // exact text key
    std::map<std::string, std::vector<std::vector<double>>> token_embeddings;
    std::vector<CrossRule> cross_rules;

    static MockScript load(const std::string& path);
};

// Offline gateway driven by a MockScript.
//
// complete(): first rule whose `match` is a substring of the prompt wins;
// with no match, non-strict mode echoes the prompt back. embed()/
// embed_tokens() use scripted vectors when the exact text is in the script
// and otherwise fall back to the hashing embedder (strictness does not
// apply; the hashing embedder IS the deterministic mock behaviour).
// cross_score() falls back to the count of shared distinct lowercase
// tokens unless strict mode is set and no rule matches.
class MockGateway : public ModelGateway {
public:
    explicit MockGateway(MockScript script);

    std::string complete(const std::string& prompt, double temperature,
                         std::optional<std::uint64_t> seed = {}) override;
    std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) override;
    TokenEmbeddingMatrix embed_tokens(const std::string& text) override;
    double cross_score(const std::string& query,
                       const std::string& passage) override;

    struct Counts {
        std::size_t complete = 0;
        std::size_t embed = 0;
        std::size_t embed_tokens = 0;
        std::size_t cross = 0;
        std::size_t injected_failures = 0;
    };
    Counts counts() const;

private:
    MockScript script_;
    Counts counts_;
    mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// HTTP client

// JSON-over-HTTP endpoints, one URL per operation:
//   chat:        POST {model, prompt, temperature, seed?} -> {text}
//   embed:       POST {model, texts: [...]}               -> {embeddings: [[..]]}
//   token_embed: POST {model, text}                       -> {rows: [[..]]}
//   cross:       POST {model, query, passage}             -> {score}
struct GatewayEndpoints {
    std::string chat_url;
    std::string embed_url;
    std::string token_embed_url;
    std::string cross_url;
    std::string model = "default";
    int timeout_ms = 30000;
    int max_inflight = 4;
};

class HttpGateway : public ModelGateway {
public:
    explicit HttpGateway(GatewayEndpoints endpoints);
    ~HttpGateway() override;

    std::string complete(const std::string& prompt, double temperature,
                         std::optional<std::uint64_t> seed = {}) override;
    std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) override;
    TokenEmbeddingMatrix embed_tokens(const std::string& text) override;
    double cross_score(const std::string& query,
                       const std::string& passage) override;

private:
    class Impl;
    std::unique_ptr<Impl> impl_;
};

// Decorator retrying TransportError up to `retry_budget` extra attempts.
class RetryingGateway : public ModelGateway {
public:
    RetryingGateway(std::shared_ptr<ModelGateway> inner, int retry_budget);

    std::string complete(const std::string& prompt, double temperature,
                         std::optional<std::uint64_t> seed = {}) override;
    std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) override;
    TokenEmbeddingMatrix embed_tokens(const std::string& text) override;
    double cross_score(const std::string& query,
                       const std::string& passage) override;

private:
    template <typename Fn>
    auto with_retries(Fn&& fn) -> decltype(fn());

    std::shared_ptr<ModelGateway> inner_;
    int retry_budget_;
};

}  // namespace tierrank
