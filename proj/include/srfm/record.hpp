#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace srfm {

enum class DomainKind { kSearch, kRec, kSearchRec };

inline DomainKind domain_kind_from_string(const std::string& s) {
    if (s == "S") return DomainKind::kSearch;
    if (s == "R") return DomainKind::kRec;
    if (s == "SR") return DomainKind::kSearchRec;
    throw std::invalid_argument("bad domain_kind: " + s);
}
inline const char* to_string(DomainKind k) {
    switch (k) {
        case DomainKind::kSearch: return "S";
        case DomainKind::kRec: return "R";
        default: return "SR";
    }
}

// One click or search interaction in the user's unified behavior sequence.
struct BehaviorEvent {
    long long item_id = 0;
    DomainKind behavior_type = DomainKind::kRec;  // S or R only
    std::vector<long long> attr_ids;

    bool operator==(const BehaviorEvent&) const = default;
};

// One labeled (user, query, item) event.
struct InteractionRecord {
    int domain_id = 1;  // 1-based
    DomainKind domain_kind = DomainKind::kSearch;
    long long user_id = 0;
    std::optional<std::string> query_text;  // absent for R records
    long long item_id = 0;
    std::string item_title;
    std::vector<BehaviorEvent> history;
    std::vector<long long> query_sparse_ids;
    std::vector<long long> item_sparse_ids;
    std::optional<int> y_ctr;
    std::optional<int> y_sim;

    bool has_query() const { return query_text.has_value(); }

    bool operator==(const InteractionRecord&) const = default;
};

struct ParseError : std::runtime_error {
    int line_no;
    ParseError(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_no(line) {}
};

namespace detail {

inline void check_label(const nlohmann::json& j, const char* key, int line,
                        std::optional<int>& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    if (!j.at(key).is_number_integer())
        throw ParseError(line, std::string(key) + " must be 0 or 1");
    int v = j.at(key).get<int>();
    if (v != 0 && v != 1) throw ParseError(line, std::string(key) + " must be 0 or 1");
    out = v;
}

}  // namespace detail

inline InteractionRecord parse_record(const std::string& line, int line_no = 0) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(line_no, std::string("bad JSON: ") + e.what());
    }
    for (const char* key : {"domain_id", "domain_kind", "user_id", "item_id", "item_title"})
        if (!j.contains(key)) throw ParseError(line_no, std::string("missing field ") + key);

    InteractionRecord r;
    try {
        r.domain_id = j.at("domain_id").get<int>();
        r.domain_kind = domain_kind_from_string(j.at("domain_kind").get<std::string>());
        r.user_id = j.at("user_id").get<long long>();
        r.item_id = j.at("item_id").get<long long>();
        r.item_title = j.at("item_title").get<std::string>();
        if (j.contains("query_text") && !j.at("query_text").is_null())
            r.query_text = j.at("query_text").get<std::string>();
        if (j.contains("history"))
            for (const auto& h : j.at("history")) {
                BehaviorEvent e;
                e.item_id = h.at("item_id").get<long long>();
                e.behavior_type = domain_kind_from_string(h.at("type").get<std::string>());
                if (e.behavior_type == DomainKind::kSearchRec)
                    throw ParseError(line_no, "behavior type must be S or R");
                if (h.contains("attrs")) e.attr_ids = h.at("attrs").get<std::vector<long long>>();
                r.history.push_back(std::move(e));
            }
        if (j.contains("query_sparse"))
            r.query_sparse_ids = j.at("query_sparse").get<std::vector<long long>>();
        if (j.contains("item_sparse"))
            r.item_sparse_ids = j.at("item_sparse").get<std::vector<long long>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(line_no, std::string("bad field: ") + e.what());
    }
    detail::check_label(j, "y_ctr", line_no, r.y_ctr);
    detail::check_label(j, "y_sim", line_no, r.y_sim);

    if (r.domain_id < 1) throw ParseError(line_no, "domain_id must be >= 1");
    if (r.domain_kind == DomainKind::kRec) {
        if (r.query_text) throw ParseError(line_no, "R record must not carry query_text");
        if (r.y_sim) throw ParseError(line_no, "R record must not carry y_sim");
    } else if (!r.query_text) {
        throw ParseError(line_no, "S record must carry query_text");
    }
    if (!r.y_ctr && !r.y_sim) throw ParseError(line_no, "record carries no label");
    return r;
}

inline std::string serialize_record(const InteractionRecord& r) {
    nlohmann::json j;
    j["domain_id"] = r.domain_id;
    j["domain_kind"] = to_string(r.domain_kind);
    j["user_id"] = r.user_id;
    if (r.query_text) j["query_text"] = *r.query_text;
    j["item_id"] = r.item_id;
    j["item_title"] = r.item_title;
    nlohmann::json hist = nlohmann::json::array();
    for (const BehaviorEvent& e : r.history) {
        nlohmann::json h;
        h["item_id"] = e.item_id;
        h["type"] = to_string(e.behavior_type);
        h["attrs"] = e.attr_ids;
        hist.push_back(std::move(h));
    }
    j["history"] = std::move(hist);
    j["query_sparse"] = r.query_sparse_ids;
    j["item_sparse"] = r.item_sparse_ids;
    if (r.y_ctr) j["y_ctr"] = *r.y_ctr;
    if (r.y_sim) j["y_sim"] = *r.y_sim;
    return j.dump();
}

}  // namespace srfm
