#include "vidinfer/run_record.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace vidinfer {
namespace {

using nlohmann::json;

json captions_to_json(const std::vector<Caption>& captions) {
    json arr = json::array();
    for (const auto& c : captions) arr.push_back({{"frame_index", c.frame_index}, {"text", c.text}});
    return arr;
}

std::vector<Caption> captions_from_json(const json& arr) {
    std::vector<Caption> out;
    for (const auto& item : arr)
        out.push_back({item.at("frame_index").get<int>(), item.at("text").get<std::string>()});
    return out;
}

}  // namespace

std::string record_to_json(const RunRecord& r) {
    json steps = json::array();
    for (const auto& s : r.steps)
        steps.push_back({{"text", s.text}, {"hypothesis", s.hypothesis_index}});

    json j{
        {"video_id", r.video_id},
        {"task", to_string(r.task.name)},
        {"target_phrase", r.task.target_phrase},
        {"rho", r.rho},
        {"status", r.status},
        {"error", r.error},
        {"sampled_frames", r.sampled_frames},
        {"captions_initial", captions_to_json(r.captions_initial)},
        {"hypotheses_initial", r.hypotheses_initial},
        {"steps", steps},
        {"selected_frames", r.selected_frames},
        {"captions_selected", captions_to_json(r.captions_selected)},
        {"hypotheses_selected", r.hypotheses_selected},
        {"clip_hypothesis", r.clip_hypothesis ? json(*r.clip_hypothesis) : json(nullptr)},
        {"final_answer", r.final_answer},
        {"answer_in_options", r.answer_in_options},
        {"calls",
         {{"chat", r.calls.chat},
          {"caption", r.calls.caption},
          {"embed_text", r.calls.embed_text},
          {"embed_image", r.calls.embed_image}}},
        {"timing_ms",
         {{"see", r.timing.see_ms},
          {"guess", r.timing.guess_ms},
          {"select", r.timing.select_ms},
          {"infer", r.timing.infer_ms},
          {"total", r.timing.total_ms}}},
    };
    return j.dump();
}

RunRecord record_from_json(const std::string& line) {
    const json j = json::parse(line);
    RunRecord r;
    r.video_id = j.at("video_id").get<std::string>();
    const auto task = task_from_string(j.at("task").get<std::string>());
    if (!task) throw std::runtime_error("record: unknown task '" + j.at("task").get<std::string>() + "'");
    r.task.name = *task;
    r.task.target_phrase = j.at("target_phrase").get<std::string>();
    r.rho = j.at("rho").get<double>();
    r.status = j.at("status").get<std::string>();
    r.error = j.at("error").get<std::string>();
    r.sampled_frames = j.at("sampled_frames").get<std::vector<int>>();
    r.captions_initial = captions_from_json(j.at("captions_initial"));
    r.hypotheses_initial = j.at("hypotheses_initial").get<std::vector<std::string>>();
    for (const auto& s : j.at("steps"))
        r.steps.push_back({s.at("text").get<std::string>(), s.at("hypothesis").get<int>()});
    r.selected_frames = j.at("selected_frames").get<std::vector<int>>();
    r.captions_selected = captions_from_json(j.at("captions_selected"));
    r.hypotheses_selected = j.at("hypotheses_selected").get<std::vector<std::string>>();
    if (!j.at("clip_hypothesis").is_null())
        r.clip_hypothesis = j.at("clip_hypothesis").get<std::string>();
    r.final_answer = j.at("final_answer").get<std::string>();
    r.answer_in_options = j.at("answer_in_options").get<bool>();
    const auto& calls = j.at("calls");
    r.calls.chat = calls.at("chat").get<int>();
    r.calls.caption = calls.at("caption").get<int>();
    r.calls.embed_text = calls.at("embed_text").get<int>();
    r.calls.embed_image = calls.at("embed_image").get<int>();
    const auto& t = j.at("timing_ms");
    r.timing.see_ms = t.at("see").get<double>();
    r.timing.guess_ms = t.at("guess").get<double>();
    r.timing.select_ms = t.at("select").get<double>();
    r.timing.infer_ms = t.at("infer").get<double>();
    r.timing.total_ms = t.at("total").get<double>();
    return r;
}

std::vector<RunRecord> read_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("records: cannot open '" + path + "'");
    std::vector<RunRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(record_from_json(line));
    }
    return out;
}

bool records_equal_ignoring_timing(const RunRecord& a, const RunRecord& b) {
    json ja = json::parse(record_to_json(a));
    json jb = json::parse(record_to_json(b));
    ja.erase("timing_ms");
    jb.erase("timing_ms");
    return ja == jb;
}

}  // namespace vidinfer
