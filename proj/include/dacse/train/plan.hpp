#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dacse/common.hpp"
#include "dacse/degrade/distortion.hpp"

namespace dacse {

// Declarative training plan, read from a key=value text file. `#` starts a
// comment; unknown keys are rejected so typos fail loudly. A stage-1 run uses
// steps_per_task as its total step budget.
struct TrainPlan {
    std::string stage = "stage1";                // stage1 | stage2
    std::vector<DistortionKind> task_order;      // stage-2 fine-tuning order
    int steps_per_task = 1000;
    int batch_tokens = 4096;
    int eval_every = 100;
    uint64_t seed = 1;

    // Optimizer knobs with schedule defaults; overridable from the plan file.
    double lr = 3e-4;
    int warmup_steps = 100;
    double weight_decay = 0.01;
    double clip_norm = 1.0;

    void validate() const {
        if (stage != "stage1" && stage != "stage2")
            throw ConfigError("plan: stage must be stage1 or stage2, got '" + stage + "'");
        if (steps_per_task < 1) throw ConfigError("plan: steps_per_task must be >= 1");
        if (batch_tokens < 8) throw ConfigError("plan: batch_tokens must be >= 8");
        if (eval_every < 1) throw ConfigError("plan: eval_every must be >= 1");
        if (lr <= 0.0) throw ConfigError("plan: lr must be positive");
        if (stage == "stage2") {
            if (task_order.empty()) throw ConfigError("plan: stage2 requires task_order");
            for (size_t i = 0; i < task_order.size(); ++i)
                for (size_t j = i + 1; j < task_order.size(); ++j)
                    if (task_order[i] == task_order[j])
                        throw ConfigError("plan: task_order repeats " +
                                          std::string(kind_name(task_order[i])));
        }
    }

    static TrainPlan parse(const std::string& text) {
        TrainPlan plan;
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto strip = [](std::string s) {
                const size_t a = s.find_first_not_of(" \t\r");
                if (a == std::string::npos) return std::string();
                const size_t b = s.find_last_not_of(" \t\r");
                return s.substr(a, b - a + 1);
            };
            line = strip(line);
            if (line.empty()) continue;
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("plan line " + std::to_string(line_no) + ": expected key=value");
            const std::string key = strip(line.substr(0, eq));
            const std::string val = strip(line.substr(eq + 1));
            try {
                if (key == "stage") plan.stage = val;
                else if (key == "task_order") {
                    plan.task_order.clear();
                    std::istringstream items(val);
                    std::string item;
                    while (std::getline(items, item, ','))
                        plan.task_order.push_back(kind_from_name(strip(item)));
                } else if (key == "steps_per_task") plan.steps_per_task = std::stoi(val);
                else if (key == "batch_tokens") plan.batch_tokens = std::stoi(val);
                else if (key == "eval_every") plan.eval_every = std::stoi(val);
                else if (key == "seed") plan.seed = std::stoull(val);
                else if (key == "lr") plan.lr = std::stod(val);
                else if (key == "warmup_steps") plan.warmup_steps = std::stoi(val);
                else if (key == "weight_decay") plan.weight_decay = std::stod(val);
                else if (key == "clip_norm") plan.clip_norm = std::stod(val);
                else throw ConfigError("plan line " + std::to_string(line_no) + ": unknown key '" +
                                       key + "'");
            } catch (const std::invalid_argument&) {
                throw ConfigError("plan line " + std::to_string(line_no) + ": bad value for '" +
                                  key + "'");
            } catch (const std::out_of_range&) {
                throw ConfigError("plan line " + std::to_string(line_no) + ": value out of range");
            }
        }
        plan.validate();
        return plan;
    }

    static TrainPlan parse_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open plan: " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str());
    }
};

}  // namespace dacse
