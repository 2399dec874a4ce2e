#pragma once

#include "error.hpp"
#include "geometry.hpp"
#include "image.hpp"
#include "screen.hpp"
#include "synth.hpp"
#include "task.hpp"
#include "util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace flowcritic {

// Tool names on the wire.
inline constexpr const char* kObjectDetection = "object_detection";
inline constexpr const char* kVisualGrounding = "visual_grounding";
inline constexpr const char* kZoomTool = "zoom_tool";
inline constexpr const char* kOcr = "ocr";
inline constexpr const char* kTemplateMatch = "template_match";

inline bool is_supported_tool(std::string_view name) {
    return name == kObjectDetection || name == kVisualGrounding || name == kZoomTool || name == kOcr ||
           name == kTemplateMatch;
}

struct Detection {
    std::string label;
    BoundingBox box;
    double score = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct OcrToken {
    std::string word;
    BoundingBox box;
    double confidence = 1.0;

    friend bool operator==(const OcrToken&, const OcrToken&) = default;
};

struct TemplateMatch {
    std::string template_id;
    BoundingBox box;
    double score = 0.0;

    friend bool operator==(const TemplateMatch&, const TemplateMatch&) = default;
};

struct FocusImage {
    std::string ref;
    BoundingBox region;   // clamped
    Image pixels;

    int width() const { return pixels.width(); }
    int height() const { return pixels.height(); }
};

struct ToolCall {
    std::string tool;
    nlohmann::json args = nlohmann::json::object();

    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

/// Wire response: {ok, result, error?}.
struct ToolResponse {
    bool ok = false;
    nlohmann::json result = nlohmann::json::object();
    std::string error;

    static ToolResponse success(nlohmann::json result) { return {true, std::move(result), {}}; }
    static ToolResponse failure(std::string error) { return {false, nlohmann::json::object(), std::move(error)}; }

    nlohmann::json to_wire() const {
        nlohmann::json j = {{"ok", ok}, {"result", result}};
        if (!ok) j["error"] = error;
        return j;
    }

    static ToolResponse from_wire(const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("ok") || !j["ok"].is_boolean()) {
            throw ProtocolError(ErrorCode::SchemaViolation, "tool response lacks boolean 'ok'", "ok");
        }
        ToolResponse r;
        r.ok = j["ok"].get<bool>();
        r.result = j.value("result", nlohmann::json::object());
        r.error = j.value("error", std::string{});
        return r;
    }
};

/// The screen a tool call runs against: a file, a synthetic description, or both.
struct ScreenInput {
    std::string ref;
    std::optional<SyntheticScreen> synthetic;
    fs::path image_path;

    static ScreenInput from_step(const Step& step, std::string ref) {
        return ScreenInput{std::move(ref), step.synthetic, step.screenshot};
    }

    static ScreenInput from_synthetic(SyntheticScreen screen, std::string ref = "screen") {
        return ScreenInput{std::move(ref), std::move(screen), {}};
    }

    Image image() const {
        if (!image_path.empty() && fs::is_regular_file(image_path)) return load_png(image_path);
        if (synthetic) return render_screen(*synthetic);
        throw Error(ErrorCode::UnresolvableImage, "screen " + ref + " has no image");
    }

    std::string png_bytes() const {
        if (!image_path.empty() && fs::is_regular_file(image_path)) return read_file(image_path);
        return encode_png(image());
    }
};

// ---------------------------------------------------------------------------
// Mock perception: pure functions of (SyntheticScreen, arguments).

/// Widgets whose label contains `query` (case-insensitive), or whose widget
/// class equals it. Exact label match scores 1.0, substring |q|/|label|,
/// class match 0.5. Descending score; ties keep screen order.
inline std::vector<Detection> detect_objects(const SyntheticScreen& screen, std::string_view query) {
    auto q = normalize_text(query);
    if (q.empty()) throw Error(ErrorCode::InvalidArgument, "detection query must be non-empty");
    std::vector<Detection> hits;
    for (const auto& w : screen.widgets) {
        auto label = normalize_text(w.label);
        auto cls = std::string(to_string(w.kind));
        double score = 0.0;
        if (label == q) {
            score = 1.0;
        } else if (label.find(q) != std::string::npos) {
            score = static_cast<double>(q.size()) / static_cast<double>(label.size());
        } else if (q == cls || q == cls + "s") {
            score = 0.5;
        }
        if (score > 0.0) hits.push_back({w.label, w.box, score});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    return hits;
}

inline FocusImage zoom_crop(const Image& screen, const BoundingBox& region, const std::string& screen_ref = "screen") {
    auto [pixels, clamped] = crop(screen, region);
    std::ostringstream ref;
    ref << screen_ref << "#crop" << clamped;
    return FocusImage{ref.str(), clamped, std::move(pixels)};
}

inline std::vector<OcrToken> run_ocr(const SyntheticScreen& screen) {
    std::vector<OcrToken> tokens;
    tokens.reserve(screen.texts.size());
    for (const auto& t : screen.texts) tokens.push_back({t.content, t.box, 1.0});
    return tokens;
}

inline constexpr double kDefaultTemplateFloor = 0.8;

/// Scale-invariant matching: a widget carrying the template's icon matches
/// with score 1 / (1 + 0.1 |log2 magnification|).
inline std::vector<TemplateMatch> match_template(const SyntheticScreen& screen, const std::string& template_id,
                                                 double floor = kDefaultTemplateFloor) {
    const auto& ids = known_templates();
    if (std::find(ids.begin(), ids.end(), template_id) == ids.end()) {
        throw Error(ErrorCode::UnknownTemplate, "unknown template '" + template_id + "'");
    }
    double score = 1.0 / (1.0 + 0.1 * std::abs(std::log2(screen.magnification)));
    std::vector<TemplateMatch> matches;
    for (const auto& w : screen.widgets) {
        if (w.icon && *w.icon == template_id && score >= floor) matches.push_back({template_id, w.box, score});
    }
    std::stable_sort(matches.begin(), matches.end(),
                     [](const TemplateMatch& a, const TemplateMatch& b) { return a.score > b.score; });
    return matches;
}

// ---------------------------------------------------------------------------
// Wire-form result payloads shared by every backend.

inline nlohmann::json detections_json(const std::vector<Detection>& ds, const std::string& query) {
    auto arr = nlohmann::json::array();
    for (const auto& d : ds) arr.push_back({{"label", d.label}, {"query", query}, {"box", d.box}, {"score", d.score}});
    return arr;
}

inline nlohmann::json tokens_json(const std::vector<OcrToken>& ts) {
    auto arr = nlohmann::json::array();
    for (const auto& t : ts) arr.push_back({{"word", t.word}, {"box", t.box}, {"confidence", t.confidence}});
    return arr;
}

inline nlohmann::json matches_json(const std::vector<TemplateMatch>& ms) {
    auto arr = nlohmann::json::array();
    for (const auto& m : ms) arr.push_back({{"template", m.template_id}, {"box", m.box}, {"score", m.score}});
    return arr;
}

/// Perception backend contract. Implementations must be safe to call
/// concurrently from several rollouts.
class ToolBackend {
public:
    virtual ~ToolBackend() = default;
    virtual std::string identity() const = 0;
    virtual ToolResponse call(const ToolCall& call, const ScreenInput& screen) const = 0;
};

inline std::vector<std::string> string_list_arg(const nlohmann::json& args, const char* key) {
    std::vector<std::string> out;
    if (!args.contains(key)) return out;
    const auto& v = args[key];
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
    } else if (v.is_array()) {
        for (const auto& e : v) {
            if (e.is_string()) out.push_back(e.get<std::string>());
        }
    }
    return out;
}

class MockToolBackend final : public ToolBackend {
public:
    explicit MockToolBackend(double template_floor = kDefaultTemplateFloor) : template_floor_(template_floor) {}

    std::string identity() const override { return "mock"; }

    ToolResponse call(const ToolCall& call, const ScreenInput& screen) const override {
        if (!is_supported_tool(call.tool)) return ToolResponse::failure("unsupported");
        try {
            if (call.tool == kZoomTool) return zoom(call, screen);
            if (!screen.synthetic) return ToolResponse::failure("backend-unavailable: no synthetic screen for " + screen.ref);
            const auto& s = *screen.synthetic;

            if (call.tool == kVisualGrounding || call.tool == kObjectDetection) {
                auto queries = string_list_arg(call.args, "query");
                auto objects = string_list_arg(call.args, "objects");
                queries.insert(queries.end(), objects.begin(), objects.end());
                if (queries.empty()) return ToolResponse::failure("invalid-argument: missing query");
                auto all = nlohmann::json::array();
                for (const auto& q : queries) {
                    for (auto& d : detections_json(detect_objects(s, q), q)) all.push_back(std::move(d));
                }
                return ToolResponse::success({{"detections", all}});
            }
            if (call.tool == kOcr) return ToolResponse::success({{"tokens", tokens_json(run_ocr(s))}});
            if (call.tool == kTemplateMatch) {
                auto ids = string_list_arg(call.args, "template");
                if (ids.empty()) return ToolResponse::failure("invalid-argument: missing template");
                return ToolResponse::success({{"matches", matches_json(match_template(s, ids.front(), template_floor_))}});
            }
        } catch (const Error& e) {
            return ToolResponse::failure(e.what());
        } catch (const nlohmann::json::exception& e) {
            return ToolResponse::failure(std::string("invalid-argument: ") + e.what());
        }
        return ToolResponse::failure("unsupported");
    }

private:
    static ToolResponse zoom(const ToolCall& call, const ScreenInput& screen) {
        BoundingBox region;
        if (call.args.contains("region")) {
            region = call.args["region"].get<BoundingBox>();
        } else if (call.args.contains("bbox")) {
            region = call.args["bbox"].get<BoundingBox>();
        } else {
            return ToolResponse::failure("invalid-argument: missing region");
        }
        auto focus = zoom_crop(screen.image(), region, screen.ref);
        return ToolResponse::success({{"ref", focus.ref},
                                      {"region", focus.region},
                                      {"width", focus.width()},
                                      {"height", focus.height()},
                                      {"image", base64_encode(encode_png(focus.pixels))}});
    }

    double template_floor_;
};

// ---------------------------------------------------------------------------
// Aggregation into the unified per-step grounding record.

struct ToolProvenance {
    std::string tool;
    int call_index = 0;
    nlohmann::json args;

    friend bool operator==(const ToolProvenance&, const ToolProvenance&) = default;
};

struct DetectionEntry {
    std::string query;
    Detection detection;
    ToolProvenance source;
};

struct TokenEntry {
    OcrToken token;
    ToolProvenance source;
};

struct CropEntry {
    BoundingBox region;
    std::string ref;
    int width = 0;
    int height = 0;
    ToolProvenance source;
};

struct MatchEntry {
    TemplateMatch match;
    ToolProvenance source;
};

struct ToolFailureEntry {
    std::string error;
    ToolProvenance source;
};

/// Per-step grounding features: every entry carries the call that made it.
struct GroundingFeatures {
    std::vector<DetectionEntry> detections;
    std::vector<TokenEntry> tokens;
    std::vector<CropEntry> crops;
    std::vector<MatchEntry> matches;
    std::vector<ToolFailureEntry> failures;

    std::size_t entry_count() const {
        return detections.size() + tokens.size() + crops.size() + matches.size() + failures.size();
    }

    bool empty() const { return entry_count() == 0; }

    std::vector<ToolProvenance> provenance() const {
        std::vector<ToolProvenance> out;
        for (const auto& e : detections) out.push_back(e.source);
        for (const auto& e : tokens) out.push_back(e.source);
        for (const auto& e : crops) out.push_back(e.source);
        for (const auto& e : matches) out.push_back(e.source);
        for (const auto& e : failures) out.push_back(e.source);
        return out;
    }
};

struct ToolOutput {
    ToolCall call;
    int call_index = 0;
    ToolResponse response;
};

inline constexpr double kMergeIou = 0.9;

/// Folds tool outputs (sorted by tool name, then call order) into one
/// record. Same-query detections with IoU > 0.9 collapse to the higher score.
inline GroundingFeatures aggregate_grounding(std::vector<ToolOutput> outputs) {
    std::stable_sort(outputs.begin(), outputs.end(), [](const ToolOutput& a, const ToolOutput& b) {
        if (a.call.tool != b.call.tool) return a.call.tool < b.call.tool;
        return a.call_index < b.call_index;
    });

    GroundingFeatures f;
    for (const auto& out : outputs) {
        ToolProvenance source{out.call.tool, out.call_index, out.call.args};
        if (!out.response.ok) {
            f.failures.push_back({out.response.error, source});
            continue;
        }
        const auto& r = out.response.result;
        try {
            if (r.contains("detections")) {
                for (const auto& d : r["detections"]) {
                    DetectionEntry e{d.value("query", std::string{}),
                                     {d.value("label", std::string{}), d.at("box").get<BoundingBox>(),
                                      d.value("score", 0.0)},
                                     source};
                    auto dup = std::find_if(f.detections.begin(), f.detections.end(), [&](const DetectionEntry& x) {
                        return x.query == e.query && iou(x.detection.box, e.detection.box) > kMergeIou;
                    });
                    if (dup == f.detections.end()) {
                        f.detections.push_back(std::move(e));
                    } else if (e.detection.score > dup->detection.score) {
                        *dup = std::move(e);
                    }
                }
            }
            if (r.contains("tokens")) {
                for (const auto& t : r["tokens"]) {
                    f.tokens.push_back({{t.at("word").get<std::string>(), t.at("box").get<BoundingBox>(),
                                         t.value("confidence", 1.0)},
                                        source});
                }
            }
            if (r.contains("matches")) {
                for (const auto& m : r["matches"]) {
                    f.matches.push_back({{m.at("template").get<std::string>(), m.at("box").get<BoundingBox>(),
                                          m.value("score", 0.0)},
                                         source});
                }
            }
            if (r.contains("region") && r.contains("ref")) {
                f.crops.push_back({r["region"].get<BoundingBox>(), r["ref"].get<std::string>(), r.value("width", 0),
                                   r.value("height", 0), source});
            }
        } catch (const nlohmann::json::exception& e) {
            f.failures.push_back({std::string("malformed tool result: ") + e.what(), source});
        }
    }
    return f;
}

inline void to_json(nlohmann::json& j, const ToolProvenance& p) {
    j = {{"tool", p.tool}, {"call", p.call_index}, {"args", p.args}};
}

inline void from_json(const nlohmann::json& j, ToolProvenance& p) {
    p.tool = j.at("tool").get<std::string>();
    p.call_index = j.at("call").get<int>();
    p.args = j.at("args");
}

inline void to_json(nlohmann::json& j, const GroundingFeatures& f) {
    auto det = nlohmann::json::array();
    for (const auto& e : f.detections) {
        det.push_back({{"query", e.query}, {"label", e.detection.label}, {"box", e.detection.box},
                       {"score", e.detection.score}, {"source", e.source}});
    }
    auto tok = nlohmann::json::array();
    for (const auto& e : f.tokens) {
        tok.push_back({{"word", e.token.word}, {"box", e.token.box}, {"confidence", e.token.confidence},
                       {"source", e.source}});
    }
    auto crops = nlohmann::json::array();
    for (const auto& e : f.crops) {
        crops.push_back({{"region", e.region}, {"ref", e.ref}, {"width", e.width}, {"height", e.height},
                         {"source", e.source}});
    }
    auto matches = nlohmann::json::array();
    for (const auto& e : f.matches) {
        matches.push_back({{"template", e.match.template_id}, {"box", e.match.box}, {"score", e.match.score},
                           {"source", e.source}});
    }
    auto failures = nlohmann::json::array();
    for (const auto& e : f.failures) failures.push_back({{"error", e.error}, {"source", e.source}});
    j = {{"detections", det}, {"tokens", tok}, {"crops", crops}, {"matches", matches}, {"failures", failures}};
}

inline void from_json(const nlohmann::json& j, GroundingFeatures& f) {
    f = {};
    for (const auto& e : j.at("detections")) {
        f.detections.push_back({e.at("query").get<std::string>(),
                                {e.at("label").get<std::string>(), e.at("box").get<BoundingBox>(),
                                 e.at("score").get<double>()},
                                e.at("source").get<ToolProvenance>()});
    }
    for (const auto& e : j.at("tokens")) {
        f.tokens.push_back({{e.at("word").get<std::string>(), e.at("box").get<BoundingBox>(),
                             e.at("confidence").get<double>()},
                            e.at("source").get<ToolProvenance>()});
    }
    for (const auto& e : j.at("crops")) {
        f.crops.push_back({e.at("region").get<BoundingBox>(), e.at("ref").get<std::string>(), e.at("width").get<int>(),
                           e.at("height").get<int>(), e.at("source").get<ToolProvenance>()});
    }
    for (const auto& e : j.at("matches")) {
        f.matches.push_back({{e.at("template").get<std::string>(), e.at("box").get<BoundingBox>(),
                              e.at("score").get<double>()},
                             e.at("source").get<ToolProvenance>()});
    }
    for (const auto& e : j.at("failures")) {
        f.failures.push_back({e.at("error").get<std::string>(), e.at("source").get<ToolProvenance>()});
    }
}

/// Content-free feature counts, safe to embed in memory summaries.
inline std::string summarize_features(const GroundingFeatures& f) {
    return std::to_string(f.detections.size()) + " detections, " + std::to_string(f.tokens.size()) + " tokens, " +
           std::to_string(f.matches.size()) + " template matches, " + std::to_string(f.crops.size()) + " crops";
}

/// The runtime's own grounding pass over the current screen, run before the
/// actor is asked: OCR, widget-class detection, and every known template.
inline std::vector<ToolCall> base_grounding_calls() {
    std::vector<ToolCall> calls;
    calls.push_back({kOcr, nlohmann::json::object()});
    calls.push_back({kObjectDetection, {{"objects", {"button", "input", "list", "viewer"}}}});
    for (const auto& id : known_templates()) calls.push_back({kTemplateMatch, {{"template", id}}});
    return calls;
}

inline GroundingFeatures run_grounding(const ToolBackend& backend, const std::vector<ToolCall>& calls,
                                       const ScreenInput& screen) {
    std::vector<ToolOutput> outputs;
    outputs.reserve(calls.size());
    for (std::size_t i = 0; i < calls.size(); ++i) {
        outputs.push_back({calls[i], static_cast<int>(i), backend.call(calls[i], screen)});
    }
    return aggregate_grounding(std::move(outputs));
}

} // namespace flowcritic
