#include "tierrank/gateway.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tierrank/text.hpp"
#include "tierrank/vec.hpp"

namespace tierrank {

using json = nlohmann::json;

namespace {

// FNV-1a, stable across platforms.
std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

std::vector<double> hash_embed(const std::string& text, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    for (const auto& token : split_whitespace(normalize_text(text))) {
        const std::uint64_t h = fnv1a(token);
        const std::size_t idx = static_cast<std::size_t>(h % dim);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[idx] += sign;
    }
    return normalized(v);
}

std::vector<std::vector<double>> hash_embed_tokens(const std::string& text,
                                                   std::size_t dim) {
    std::vector<std::vector<double>> rows;
    for (const auto& token : split_whitespace(normalize_text(text))) {
        std::vector<double> row(dim, 0.0);
        const std::uint64_t h = fnv1a(token);
        row[static_cast<std::size_t>(h % dim)] = (h >> 63) ? -1.0 : 1.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// MockScript

MockScript MockScript::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open mock script: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("mock script parse error in " + path + ": " +
                          e.what());
    }
    MockScript script;
    script.strict = j.value("strict", false);
    script.embedding_dim = j.value("embedding_dim", std::size_t{16});
    for (const auto& rule : j.value("complete", json::array())) {
        script.complete_rules.push_back(
            {rule.value("match", ""), rule.value("response", ""),
             rule.value("fail_times", 0), rule.value("max_uses", -1)});
    }
    const json embeddings = j.value("embeddings", json::object());
    for (const auto& [text, vec] : embeddings.items()) {
        script.embeddings[text] = vec.get<std::vector<double>>();
    }
    const json token_embeddings = j.value("token_embeddings", json::object());
    for (const auto& [text, rows] : token_embeddings.items()) {
        script.token_embeddings[text] =
            rows.get<std::vector<std::vector<double>>>();
    }
    for (const auto& rule : j.value("cross_scores", json::array())) {
        script.cross_rules.push_back(
            {rule.value("query_match", ""), rule.value("passage_match", ""),
             rule.value("score", 0.0), rule.value("fail_times", 0)});
    }
    return script;
}

// ---------------------------------------------------------------------------
// MockGateway

MockGateway::MockGateway(MockScript script) : script_(std::move(script)) {}

std::string MockGateway::complete(const std::string& prompt,
                                  double /*temperature*/,
                                  std::optional<std::uint64_t> /*seed*/) {
    std::lock_guard lock(mu_);
    ++counts_.complete;
    for (auto& rule : script_.complete_rules) {
        if (rule.max_uses == 0) continue;  // exhausted
        if (rule.match.empty() || prompt.find(rule.match) != std::string::npos) {
            if (rule.fail_times > 0) {
                --rule.fail_times;
                ++counts_.injected_failures;
                throw TransportError("scripted transient failure");
            }
            if (rule.max_uses > 0) --rule.max_uses;
            return rule.response;
        }
    }
    if (script_.strict) {
        throw ScriptError("strict mock: no complete rule matches prompt: " +
                          prompt.substr(0, 120));
    }
    return prompt;  // echo
}

std::vector<std::vector<double>> MockGateway::embed(
    const std::vector<std::string>& texts) {
    if (texts.empty()) throw FormatError("embed: empty text batch");
    std::lock_guard lock(mu_);
    ++counts_.embed;
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = script_.embeddings.find(t);
        if (it != script_.embeddings.end()) {
            out.push_back(it->second);
        } else {
            out.push_back(hash_embed(t, script_.embedding_dim));
        }
    }
    return out;
}

TokenEmbeddingMatrix MockGateway::embed_tokens(const std::string& text) {
    if (text.empty()) throw FormatError("embed_tokens: empty text");
    std::lock_guard lock(mu_);
    ++counts_.embed_tokens;
    TokenEmbeddingMatrix m;
    m.source_id = text;
    auto it = script_.token_embeddings.find(text);
    if (it != script_.token_embeddings.end()) {
        m.rows = it->second;
    } else {
        m.rows = hash_embed_tokens(text, script_.embedding_dim);
    }
    if (m.rows.empty()) {
        throw FormatError("embed_tokens: text has no tokens");
    }
    return m;
}

double MockGateway::cross_score(const std::string& query,
                                const std::string& passage) {
    if (query.empty() || passage.empty()) {
        throw FormatError("cross_score: empty input");
    }
    std::lock_guard lock(mu_);
    ++counts_.cross;
    for (auto& rule : script_.cross_rules) {
        const bool qm = rule.query_match.empty() ||
                        query.find(rule.query_match) != std::string::npos;
        const bool pm = rule.passage_match.empty() ||
                        passage.find(rule.passage_match) != std::string::npos;
        if (qm && pm) {
            if (rule.fail_times > 0) {
                --rule.fail_times;
                ++counts_.injected_failures;
                throw TransportError("scripted transient failure");
            }
            return rule.score;
        }
    }
    if (script_.strict) {
        throw ScriptError("strict mock: no cross_score rule matches");
    }
    // Token-overlap fallback: shared distinct lowercase tokens.
    const auto q = content_tokens(query);
    const auto p = content_tokens(passage);
    std::set<std::string> qs(q.begin(), q.end());
    std::set<std::string> ps(p.begin(), p.end());
    int overlap = 0;
    for (const auto& t : qs) {
        if (ps.count(t)) ++overlap;
    }
    return static_cast<double>(overlap);
}

MockGateway::Counts MockGateway::counts() const {
    std::lock_guard lock(mu_);
    return counts_;
}

// ---------------------------------------------------------------------------
// RetryingGateway

RetryingGateway::RetryingGateway(std::shared_ptr<ModelGateway> inner,
                                 int retry_budget)
    : inner_(std::move(inner)), retry_budget_(retry_budget) {}

template <typename Fn>
auto RetryingGateway::with_retries(Fn&& fn) -> decltype(fn()) {
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const TransportError& e) {
            if (attempt >= retry_budget_) {
                throw TransportError(std::string("retry budget exhausted: ") +
                                     e.what());
            }
            spdlog::warn("gateway transient failure (attempt {}): {}",
                         attempt + 1, e.what());
        }
    }
}

std::string RetryingGateway::complete(const std::string& prompt,
                                      double temperature,
                                      std::optional<std::uint64_t> seed) {
    return with_retries([&] { return inner_->complete(prompt, temperature, seed); });
}

std::vector<std::vector<double>> RetryingGateway::embed(
    const std::vector<std::string>& texts) {
    return with_retries([&] { return inner_->embed(texts); });
}

TokenEmbeddingMatrix RetryingGateway::embed_tokens(const std::string& text) {
    return with_retries([&] { return inner_->embed_tokens(text); });
}

double RetryingGateway::cross_score(const std::string& query,
                                    const std::string& passage) {
    return with_retries([&] { return inner_->cross_score(query, passage); });
}

}  // namespace tierrank
