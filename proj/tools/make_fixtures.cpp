// Regenerates the bundled offline fixtures. Everything written here is
// deterministic, so reruns reproduce the committed files byte for byte.
//
// Usage: make_fixtures [output_dir]   (default: fixtures)

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "eaco/feedback_ingest.hpp"
#include "eaco/jsonl.hpp"
#include "eaco/mock_task.hpp"
#include "eaco/pair_builder.hpp"

namespace {

using namespace eaco;
namespace fs = std::filesystem;

FeedbackResponse response(std::string text, int h, int vf, int ec, std::string model) {
  FeedbackResponse r;
  r.text = std::move(text);
  r.scores = ScoreTriple{h, vf, ec};
  r.source_model = std::move(model);
  return r;
}

FeedbackRecord record(std::string id, std::string prompt, std::string image,
                      std::vector<FeedbackResponse> responses) {
  FeedbackRecord rec;
  rec.id = std::move(id);
  rec.prompt = std::move(prompt);
  rec.image = std::move(image);
  rec.responses = std::move(responses);
  return rec;
}

// A small scored-feedback corpus. fb-01 carries the totals 14, 15, and 3, so
// a gap-3 filter keeps exactly the (15,3) and (14,3) pairs from it; fb-03,
// fb-05, and fb-07 survive no gap-3 pair at all.
std::vector<FeedbackRecord> feedback_corpus() {
  std::vector<FeedbackRecord> records;
  records.push_back(record(
      "fb-01", "Describe the scene.", "images/critic_01.png",
      {response("A cyclist waits at a rainy crossing beside a bakery.", 5, 4, 5, "model-a"),
       response("A cyclist in a yellow coat waits at a rainy crossing; a bakery "
                "window glows behind them.",
                5, 5, 5, "model-b"),
       response("Some kind of street, hard to say more.", 1, 1, 1, "model-c")}));
  records.push_back(record(
      "fb-02", "What is on the table?", "images/critic_02.png",
      {response("A chessboard mid-game with white to move.", 4, 4, 4, "model-a"),
       response("A board game and maybe some pieces.", 2, 2, 2, "model-b")}));
  records.push_back(record(
      "fb-03", "Summarize the chart.", "images/critic_03.png",
      {response("Sales rise steadily from March through June.", 3, 3, 3, "model-a"),
       response("The line trends upward over the spring months.", 3, 3, 2, "model-b")}));
  records.push_back(record(
      "fb-04", "Describe the animal.", "images/critic_04.png",
      {response("A tabby cat asleep on a radiator, tail tucked under.", 5, 5, 5, "model-a"),
       response("A cat sleeping indoors near a window.", 4, 4, 4, "model-b"),
       response("A cat, probably resting.", 3, 3, 3, "model-c"),
       response("An animal on furniture.", 2, 2, 2, "model-d")}));
  records.push_back(record(
      "fb-05", "Read the sign.", "images/critic_05.png",
      {response("The sign reads NO PARKING 8AM TO 6PM.", 5, 5, 5, "model-a"),
       response("It says no parking from eight to six.", 5, 5, 4, "model-b")}));
  records.push_back(record(
      "fb-06", "Describe the room.", "images/critic_06.png",
      {response("A sunlit kitchen with copper pans hung over a wooden island.", 5, 4, 4,
                "model-a"),
       response("Looks like an office or maybe a kitchen.", 1, 2, 2, "model-b"),
       response("A room with some furniture in it.", 2, 1, 2, "model-c")}));
  records.push_back(record(
      "fb-07", "Count the boats.", "images/critic_07.png",
      {response("Three sailboats and a ferry are visible.", 4, 3, 3, "model-a"),
       response("Four vessels in total on calm water.", 3, 4, 3, "model-b")}));
  records.push_back(record(
      "fb-08", "Describe the weather.", "images/critic_08.png",
      {response("Heavy snow falling on a plowed mountain road at dusk.", 5, 5, 4, "model-a"),
       response("A snowy road in the mountains.", 4, 4, 3, "model-b"),
       response("Cold outside.", 2, 1, 1, "model-c")}));
  return records;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  for (const auto& line : lines) out << line << "\n";
}

json pipeline_config() {
  return json{
      {"version", 1},
      {"seed", 7},
      {"output_dir", "runs"},
      {"feedback", {{"file", "feedback_small.jsonl"}}},
      {"filter", {{"min_gap", 3}}},
      {"prompts",
       {{"prompts",
         json::array({"Describe the image in detail.", "What is shown in this image?"})},
        {"sampler_seed", 7}}},
      {"backends",
       {{"generator", {{"kind", "scripted_mock"}, {"model_name", "planted"}}},
        {"judge", {{"kind", "rubric_mock"}, {"model_name", "judge"}}}}},
      {"build",
       {{"task_file", "mock_task.jsonl"},
        {"split", "pref"},
        {"n", 4},
        {"style", "rating"},
        {"tie_break", "skip"},
        {"min_pair_gap", 1}}},
      {"dpo",
       {{"alpha", 0.001},
        {"beta", 1.0},
        {"regularizer_placement", "inside_sigmoid"},
        {"length_unit", "tokens_whitespace"}}},
      {"train",
       {{"learning_rate", 0.1},
        {"epochs", 2},
        {"batch_size", 1},
        {"shuffle", true},
        {"rounds", 3}}},
      {"sft",
       {{"instructions", json::array({"Describe the image in detail."})},
        {"sampler_seed", 9}}},
      {"eval", {{"use_ground_truth", true}}},
      {"ablation",
       {{"axis", "dataset_size"},
        {"values", json::array({"50", "100", "200"})},
        {"rounds", 1}}}};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::path("fixtures");
  fs::create_directories(out_dir);

  MockTask task = generate_mock_task(100, 30, 2024);
  save_mock_task(out_dir / "mock_task.jsonl", task);

  write_feedback_file(out_dir / "feedback_small.jsonl", feedback_corpus());

  write_json_file(out_dir / "pipeline_mock.json", pipeline_config());

  // Overlap-check corpora: the pair file and the clean list are disjoint;
  // the dirty list shares exactly images/pref_0002.png with the pair file.
  auto gt = ground_truth_pairs(task, "Describe the image in detail.");
  gt.resize(5);
  write_pairs(out_dir / "overlap_pref.jsonl", gt);

  std::vector<std::string> sft_images = task.images("sft");
  write_lines(out_dir / "overlap_sft_clean.txt",
              {sft_images[0], sft_images[1], sft_images[2], sft_images[3]});

  std::vector<std::string> dirty;
  for (std::size_t i = 0; i < 3; ++i) {
    json line{{"image", sft_images[i]},
              {"instruction", "Describe the image in detail."},
              {"target", "drafted description " + std::to_string(i)}};
    dirty.push_back(line.dump());
  }
  dirty.push_back(json{{"image", gt[2].image},
                       {"instruction", "Describe the image in detail."},
                       {"target", "drafted description of a reserved image"}}
                      .dump());
  write_lines(out_dir / "overlap_sft_dirty.jsonl", dirty);

  std::cout << "fixtures written to " << out_dir.string() << "\n";
  return 0;
}
