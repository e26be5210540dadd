#include <nlohmann/json.hpp>

#include "tierrank/gateway.hpp"

// cpp-httplib pulls in a lot; keep it isolated to this translation unit.
#include <httplib.h>

namespace tierrank {

using json = nlohmann::json;

namespace {

struct ParsedUrl {
    std::string host_port;  // scheme://host:port
    std::string path;       // /route
};

ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("gateway url missing scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

class HttpGateway::Impl {
public:
    explicit Impl(GatewayEndpoints endpoints) : endpoints_(std::move(endpoints)) {}

    json post(const std::string& url, const json& body) {
        if (url.empty()) {
            throw ConfigError("gateway endpoint url not configured");
        }
        const auto parsed = split_url(url);
        httplib::Client client(parsed.host_port);
        client.set_connection_timeout(0, endpoints_.timeout_ms * 1000);
        client.set_read_timeout(endpoints_.timeout_ms / 1000,
                                (endpoints_.timeout_ms % 1000) * 1000);
        auto res = client.Post(parsed.path, body.dump(), "application/json");
        if (!res) {
            throw TransportError("connection failure to " + url);
        }
        if (res->status >= 500) {
            throw TransportError("server error " + std::to_string(res->status) +
                                 " from " + url);
        }
        if (res->status != 200) {
            throw FormatError("unexpected status " + std::to_string(res->status) +
                              " from " + url + ": " + res->body.substr(0, 200));
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw FormatError("invalid JSON from " + url + ": " + e.what());
        }
    }

    GatewayEndpoints endpoints_;
};

HttpGateway::HttpGateway(GatewayEndpoints endpoints)
    : impl_(std::make_unique<Impl>(std::move(endpoints))) {}

HttpGateway::~HttpGateway() = default;

std::string HttpGateway::complete(const std::string& prompt, double temperature,
                                  std::optional<std::uint64_t> seed) {
    if (prompt.empty()) throw FormatError("complete: empty prompt");
    json body = {{"model", impl_->endpoints_.model},
                 {"prompt", prompt},
                 {"temperature", temperature}};
    if (seed) body["seed"] = *seed;
    const json reply = impl_->post(impl_->endpoints_.chat_url, body);
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw FormatError("chat reply missing 'text' field");
    }
    return reply["text"].get<std::string>();
}

std::vector<std::vector<double>> HttpGateway::embed(
    const std::vector<std::string>& texts) {
    if (texts.empty()) throw FormatError("embed: empty text batch");
    const json reply = impl_->post(impl_->endpoints_.embed_url,
                                   {{"model", impl_->endpoints_.model},
                                    {"texts", texts}});
    if (!reply.contains("embeddings")) {
        throw FormatError("embed reply missing 'embeddings' field");
    }
    auto out = reply["embeddings"].get<std::vector<std::vector<double>>>();
    if (out.size() != texts.size()) {
        throw FormatError("embed reply size mismatch");
    }
    return out;
}

TokenEmbeddingMatrix HttpGateway::embed_tokens(const std::string& text) {
    if (text.empty()) throw FormatError("embed_tokens: empty text");
    const json reply = impl_->post(impl_->endpoints_.token_embed_url,
                                   {{"model", impl_->endpoints_.model},
                                    {"text", text}});
    if (!reply.contains("rows")) {
        throw FormatError("token embed reply missing 'rows' field");
    }
    TokenEmbeddingMatrix m;
    m.source_id = text;
    m.rows = reply["rows"].get<std::vector<std::vector<double>>>();
    if (m.rows.empty()) {
        throw FormatError("token embed reply has no rows");
    }
    return m;
}

double HttpGateway::cross_score(const std::string& query,
                                const std::string& passage) {
    if (query.empty() || passage.empty()) {
        throw FormatError("cross_score: empty input");
    }
    const json reply = impl_->post(impl_->endpoints_.cross_url,
                                   {{"model", impl_->endpoints_.model},
                                    {"query", query},
                                    {"passage", passage}});
    if (!reply.contains("score") || !reply["score"].is_number()) {
        throw FormatError("cross reply missing numeric 'score' field");
    }
    return reply["score"].get<double>();
}

}  // namespace tierrank
