#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lctc/domain.hpp"
#include "lctc/errors.hpp"
#include "lctc/io.hpp"

using namespace lctc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lctc_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunReport toy_report(const std::string& method, std::uint64_t seed) {
  RunReport r;
  r.method = method;
  r.policy = "none";
  r.seed = seed;
  r.task_ids = {1, 2};
  r.curve = {{2, 1, 1, 0.5}, {4, 1, 1, 0.25}, {6, 2, 1, 0.75}, {6, 2, 2, 0.125}, {8, 2, 1, 0.5}, {8, 2, 2, 0.1}};
  r.final_matrix = {{0.25, 0.9}, {0.5, 0.1}};
  r.averaged_wer = 0.3;
  r.relative_reduction_vs_baseline = 0.0;
  return r;
}

}  // namespace

TEST_CASE("reals round-trip through text") {
  for (double v : {0.1, -1e-300, 123456789.125, 1.0 / 3.0, 0.0, 5e-324}) CHECK(parse_real(format_real(v)) == v);
  CHECK_THROWS_AS(parse_real("1.5x"), FormatError);
  CHECK_THROWS_AS(parse_real(""), FormatError);
}

TEST_CASE("dataset files round-trip byte for byte") {
  auto spec = default_domains(2)[2];
  spec.num_train = 15;
  const TaskDataset ds = generate_domain(spec).train;
  std::ostringstream a;
  write_dataset(a, ds);
  std::istringstream in(a.str());
  const TaskDataset back = read_dataset(in);
  CHECK(back.task_id == ds.task_id);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.utterances[i].id == ds.utterances[i].id);
    CHECK(back.utterances[i].labels == ds.utterances[i].labels);
    CHECK(back.utterances[i].features == ds.utterances[i].features);
  }
  std::ostringstream b;
  write_dataset(b, back);
  CHECK(a.str() == b.str());

  const fs::path dir = scratch("dataset");
  save_dataset(dir / "d.txt", ds);
  std::ifstream f(dir / "d.txt");
  std::stringstream content;
  content << f.rdbuf();
  CHECK(content.str() == a.str());
  CHECK(load_dataset(dir / "d.txt").size() == ds.size());
}

TEST_CASE("malformed dataset files are rejected") {
  std::istringstream no_header("task_id 1\n");
  CHECK_THROWS_AS(read_dataset(no_header), FormatError);
  std::istringstream truncated("lctc-dataset 1\ntask_id 1\nvocab_size 3\ninput_dim 2\ncount 1\nutt a 1\nlabels 1 2\nframes 2\n0 0\n");
  CHECK_THROWS_AS(read_dataset(truncated), FormatError);
  std::istringstream bad_label("lctc-dataset 1\ntask_id 1\nvocab_size 3\ninput_dim 1\ncount 1\nutt a 1\nlabels 1 7\nframes 1\n0\n");
  CHECK_THROWS_AS(read_dataset(bad_label), InvalidArgument);
}

TEST_CASE("checkpoints restore the model exactly") {
  ModelConfig c;
  c.bidirectional = true;
  c.hidden_dim = 6;
  c.seed = 77;
  const Checkpoint ck{c, model_init(c)};
  std::ostringstream a;
  write_checkpoint(a, ck);
  std::istringstream in(a.str());
  const Checkpoint back = read_checkpoint(in);
  CHECK(back.parameters == ck.parameters);
  CHECK(back.config.bidirectional);
  CHECK(back.config.hidden_dim == 6);
  std::ostringstream b;
  write_checkpoint(b, back);
  CHECK(a.str() == b.str());

  ModelConfig other = c;
  other.hidden_dim = 7;
  std::ostringstream mismatch;
  write_checkpoint(mismatch, {other, model_init(c)});
  std::istringstream min(mismatch.str());
  CHECK_THROWS_AS(read_checkpoint(min), FormatError);
}

TEST_CASE("memory dumps use the dataset format") {
  auto spec = default_domains(3)[0];
  spec.num_train = 20;
  const TaskDataset ds = generate_domain(spec).train;
  EpisodicMemory mem(60, SelectionPolicy::median_length, 1);
  mem.rebalance(ds, nullptr);
  const fs::path dir = scratch("memory");
  const auto files = dump_memory(dir, mem, ds.vocab_size, ds.input_dim);
  REQUIRE(files.size() == 1);
  const TaskDataset back = load_dataset(files[0]);
  CHECK(back.size() == mem.stored_utterances());
  CHECK(back.total_frames() == mem.stored_frames());
}

TEST_CASE("report CSVs") {
  const RunReport r = toy_report("finetune", 1);
  std::ostringstream curve;
  write_curve_csv(curve, r);
  CHECK(curve.str().rfind(std::string(kCurveHeader) + "\n2,1,1,0.5,finetune,none,0,1\n", 0) == 0);
  std::ostringstream summary;
  write_summary_csv(summary, r);
  CHECK(summary.str() == std::string(kSummaryHeader) + "\nfinetune,none,0,1,0.3,0\n");
  std::ostringstream matrix;
  write_matrix_csv(matrix, r);
  std::istringstream min(matrix.str());
  CHECK(read_csv(min).rows.size() == 4);

  const fs::path dir = scratch("report");
  write_report(dir, r);
  for (const char* f : {"curve.csv", "final_matrix.csv", "summary.csv"}) CHECK(fs::exists(dir / f));
}

TEST_CASE("merging is associative and order independent") {
  auto table = [](const RunReport& r) {
    std::ostringstream o;
    write_curve_csv(o, r);
    std::istringstream in(o.str());
    return read_csv(in);
  };
  const CsvTable a = table(toy_report("finetune", 1)), b = table(toy_report("kd", 1)), c = table(toy_report("gem", 2));
  const CsvTable abc = merge_tables({a, b, c});
  CHECK(merge_tables({c, a, b}).rows == abc.rows);
  CHECK(merge_tables({merge_tables({a, b}), c}).rows == abc.rows);
  CHECK(merge_tables({a, merge_tables({b, c})}).rows == abc.rows);
  CHECK(merge_tables({a, a}).rows == merge_tables({a}).rows);
  CsvTable other = a;
  other.header[0] = "x";
  CHECK_THROWS_AS(merge_tables({a, other}), FormatError);
}

TEST_CASE("stage-width normalisation") {
  std::ostringstream o;
  write_curve_csv(o, toy_report("finetune", 1));
  std::istringstream in(o.str());
  const CsvTable n = normalize_stage_width(read_csv(in));
  REQUIRE(n.header.back() == "progress");
  // stage 1 spans steps 0..4, stage 2 spans 4..8
  CHECK(n.rows[0].back() == "0.5");
  CHECK(n.rows[1].back() == "1");
  CHECK(n.rows[2].back() == "1.5");
  CHECK(n.rows[5].back() == "2");
}

TEST_CASE("csv quoting") {
  CsvTable t{{"a", "b"}, {{"x,y", "say \"hi\""}}};
  std::ostringstream o;
  write_csv(o, t);
  std::istringstream in(o.str());
  const CsvTable back = read_csv(in);
  CHECK(back.rows == t.rows);
}
