#include "vidinfer/judge.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace vidinfer::judge {

std::string to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::yes: return "yes";
        case Verdict::no: return "no";
        case Verdict::unparseable: return "unparseable";
    }
    return "unparseable";
}

Verdict judge_pair(const std::string& ground_truth, const std::string& inference,
                   backends::ChatModel& chat, const prompts::Renderer& renderer) {
    const backends::ChatRequest req = renderer.render_judge(ground_truth, inference);
    const std::string reply = chat.chat(req);
    if (const auto v = prompts::parse_judge(reply)) return *v ? Verdict::yes : Verdict::no;
    backends::ChatRequest retry = req;
    retry.messages.push_back({"assistant", reply});
    retry.messages.push_back({"user", "Answer with exactly one word: Yes or No."});
    if (const auto v = prompts::parse_judge(chat.chat(retry)))
        return *v ? Verdict::yes : Verdict::no;
    return Verdict::unparseable;
}

JudgeReport judge_run(const std::vector<RunRecord>& records, const ingest::Manifest& manifest,
                      backends::ChatModel& chat, const prompts::Renderer& renderer,
                      bool count_unparseable_as_incorrect) {
    if (records.empty()) throw std::runtime_error("judge: no records to judge");

    std::map<std::string, const VideoManifestEntry*> by_id;
    for (const auto& e : manifest.entries) by_id[e.video_id] = &e;

    JudgeReport report;
    std::map<std::string, std::pair<int, int>> per_task;  // task -> (yes, judged)
    for (const auto& rec : records) {
        JudgedItem item;
        item.video_id = rec.video_id;
        item.task = to_string(rec.task.name);
        item.inference = rec.final_answer;
        const auto it = by_id.find(rec.video_id);
        if (it == by_id.end()) {
            item.error = "no manifest ground truth for '" + rec.video_id + "'";
            ++report.errored;
            report.items.push_back(std::move(item));
            continue;
        }
        item.ground_truth = it->second->ground_truth;
        if (rec.status != "ok" || rec.final_answer.empty()) {
            item.error = rec.status != "ok" ? "record failed: " + rec.error : "empty inference";
            ++report.errored;
            report.items.push_back(std::move(item));
            continue;
        }
        try {
            item.verdict = judge_pair(item.ground_truth, item.inference, chat, renderer);
        } catch (const std::exception& e) {
            item.error = e.what();
            ++report.errored;
            report.items.push_back(std::move(item));
            continue;
        }
        auto& [task_yes, task_judged] = per_task[item.task];
        switch (item.verdict) {
            case Verdict::yes:
                ++report.yes;
                ++task_yes;
                ++task_judged;
                break;
            case Verdict::no:
                ++report.no;
                ++task_judged;
                break;
            case Verdict::unparseable:
                ++report.unparseable;
                if (count_unparseable_as_incorrect) ++task_judged;
                break;
        }
        report.items.push_back(std::move(item));
    }

    int judged = report.yes + report.no;
    if (count_unparseable_as_incorrect) judged += report.unparseable;
    report.accuracy_pct = judged > 0 ? 100.0 * report.yes / judged : 0.0;
    for (const auto& [task, counts] : per_task)
        report.per_task.emplace_back(task, counts.first, counts.second);
    return report;
}

std::string report_to_tsv(const JudgeReport& report) {
    std::ostringstream out;
    out << "video_id\ttask\tverdict\tground_truth\tinference\terror\n";
    for (const auto& item : report.items)
        out << item.video_id << "\t" << item.task << "\t" << to_string(item.verdict) << "\t"
            << item.ground_truth << "\t" << item.inference << "\t" << item.error << "\n";
    out << "ACCURACY\t" << report.accuracy_pct << "\tyes=" << report.yes << "\tno=" << report.no
        << "\tunparseable=" << report.unparseable << "\terrored=" << report.errored << "\n";
    for (const auto& [task, yes, judged] : report.per_task)
        out << "TASK\t" << task << "\t" << (judged > 0 ? 100.0 * yes / judged : 0.0) << "\tyes="
            << yes << "\tjudged=" << judged << "\n";
    return out.str();
}

}  // namespace vidinfer::judge
