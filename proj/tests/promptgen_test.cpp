#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedmm/data/synth.hpp"
#include "fedmm/error.hpp"
#include "fedmm/partition/partition.hpp"
#include "fedmm/promptgen/promptgen.hpp"

using namespace fedmm;
using namespace fedmm::promptgen;
using data::PresenceMask;

namespace {

std::string golden(const std::string& name) {
  std::ifstream in(std::filesystem::path(FEDMM_GOLDEN_DIR) / name, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

data::DatasetManifest meme_manifest() {
  data::DatasetManifest m;
  m.modalities = {{"image", 2}, {"text", 2}};
  m.class_count = 2;
  data::Sample s;
  s.id = "42";
  s.label = 1;
  s.features = {std::vector<double>{0.1, 0.2}, std::vector<double>{0.3, 0.4}};
  s.text = "{text}";
  s.image = "img/42.png";
  m.samples.push_back(s);
  return m;
}

std::string erase_all(std::string s, const std::string& needle) {
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle)) s.erase(pos, needle.size());
  return s;
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("hateful memes prompts match the transcribed boxes") {
  const auto m = meme_manifest();
  const PresenceMask full(2, true);
  const auto task = hateful_memes_task();
  const auto agnostic = format_record(m.samples[0], full, m, task, true);
  const auto plain = format_record(m.samples[0], full, m, task, false);
  REQUIRE(agnostic.conversations.size() == 2);
  CHECK(agnostic.conversations[0].role == "user");
  CHECK(agnostic.conversations[0].content == golden("hateful_memes_agnostic.txt"));
  CHECK(plain.conversations[0].content == golden("hateful_memes_plain.txt"));
  CHECK(agnostic.conversations[1].role == "assistant");
  CHECK(agnostic.conversations[1].content == "(B) hateful");
  CHECK(record_to_json(agnostic) + "\n" == golden("hateful_memes_record.jsonl"));
}

TEST_CASE("the agnostic toggle only adds the two clauses") {
  const auto m = meme_manifest();
  const auto task = hateful_memes_task();
  for (std::uint32_t bits : {0b01U, 0b10U, 0b11U}) {
    const auto mask = PresenceMask::from_bits(2, bits);
    const auto on = user_content(m.samples[0], mask, m, task, true);
    const auto off = user_content(m.samples[0], mask, m, task, false);
    CHECK(erase_all(on, kAgnosticClause) == off);
    CHECK(on.size() == off.size() + 2 * std::string(kAgnosticClause).size());
  }
}

TEST_CASE("absent modalities leave an empty text slot and drop the image path") {
  const auto m = meme_manifest();
  const auto task = hateful_memes_task();
  const auto image_only = format_record(m.samples[0], PresenceMask::from_bits(2, 0b01U), m, task, false);
  CHECK(image_only.image == "img/42.png");
  CHECK(image_only.conversations[0].content.find("question.\n\nIs the content") != std::string::npos);
  const auto text_only = format_record(m.samples[0], PresenceMask::from_bits(2, 0b10U), m, task, false);
  CHECK_FALSE(text_only.image);
  CHECK(text_only.conversations[0].content.rfind("<image>\n", 0) == 0);
  CHECK(text_only.conversations[0].content.find("\n{text}\n") != std::string::npos);
  CHECK(record_to_json(text_only).find("\"image\"") == std::string::npos);
}

TEST_CASE("generic layout lists options after the header") {
  const auto task = generic_task("Which category does the post belong to", {"informative", "not_informative", "other"});
  data::DatasetManifest m;
  m.modalities = {{"image", 1}, {"text", 1}};
  m.class_count = 3;
  data::Sample s{"p1", 2, {std::vector<double>{0.0}, std::vector<double>{0.0}}, std::string("flood"), std::string("p1.jpg")};
  m.samples.push_back(s);
  const auto r = format_record(s, PresenceMask(2, true), m, task, true);
  CHECK(r.conversations[0].content ==
        "<image>\nSelect the best answer to the following multiple-choice question, without considering the "
        "modality.\nWhich category does the post belong to, without considering the modality?\nOptions:\n(A) "
        "informative\n(B) not_informative\n(C) other Answer with the option's letter from the given choices "
        "directly and only give the best option. The best answer is:");
  CHECK(r.conversations[1].content == "(C) other");
  auto bad = task;
  bad.options[1].letter = 'Z';
  CHECK_THROWS_AS(format_record(s, PresenceMask(2, true), m, bad, true), ValidationError);
  CHECK_THROWS_AS(validate(generic_task("q", {"only"})), ValidationError);
}

TEST_CASE("records round trip through json") {
  const auto m = meme_manifest();
  const auto r = format_record(m.samples[0], PresenceMask(2, true), m, hateful_memes_task(), true);
  CHECK(record_from_json(record_to_json(r)) == r);
  CHECK_THROWS_AS(record_from_json("{\"id\":1}"), ParseError);
}

TEST_CASE("export writes one file per client with every sample once") {
  data::SynthConfig sc;
  sc.class_count = 2;
  sc.samples_per_class = 40;
  sc.seed = 4;
  auto m = data::synth_generate(sc);
  for (auto& s : m.samples) {
    s.text = "caption " + s.id;
    s.image = s.id + ".png";
  }
  auto p = partition::apply_missing(partition::dirichlet_partition(m, 6, 0.3, 2), 0.4, 2);
  p.clients.push_back({});  // an empty client still gets a file
  const auto dir = std::filesystem::temp_directory_path() / "fedmm_export_test";
  std::filesystem::remove_all(dir);
  const auto task = generic_task("Which class", {"zero", "one"});
  CHECK(export_partition(p, m, task, true, dir) == 7);
  std::size_t records = 0;
  const auto index = m.id_index();
  for (std::size_t k = 0; k < 7; ++k) {
    const auto path = dir / ("client_" + std::to_string(k) + ".jsonl");
    REQUIRE(std::filesystem::exists(path));
    const auto lines = lines_of(path);
    CHECK(lines.size() == p.clients[k].size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto rec = record_from_json(lines[i]);
      const auto& a = p.clients[k].samples[i];
      CHECK(rec.id == a.sample_id);
      CHECK(rec == format_record(m.samples[index.at(a.sample_id)], a.mask, m, task, true));
    }
    records += lines.size();
  }
  CHECK(std::filesystem::file_size(dir / "client_6.jsonl") == 0);
  CHECK(records == m.samples.size());
}
