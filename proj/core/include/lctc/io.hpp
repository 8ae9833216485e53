#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lctc/data.hpp"
#include "lctc/experiment.hpp"
#include "lctc/memory.hpp"
#include "lctc/model.hpp"
#include "lctc/parameters.hpp"

namespace lctc {

// Dataset text format (one token group per line, '\n' endings):
//
//   lctc-dataset 1
//   task_id <int>
//   vocab_size <n>
//   input_dim <d>
//   count <N>
//   then N records:
//     utt <id> <source_task>
//     labels <U> l1 ... lU
//     frames <T>
//     T lines of d space-separated reals
//
// Reals use the shortest round-trip representation, so write(read(x)) == x
// byte for byte.
void write_dataset(std::ostream& out, const TaskDataset& ds);
TaskDataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const TaskDataset& ds);
TaskDataset load_dataset(const std::filesystem::path& path);

// Checkpoint text format:
//
//   lctc-checkpoint 1
//   model input_dim hidden_dim num_layers bidirectional stride vocab_size seed
//   segments <S>
//   then per segment: "<name> <rank> <dims...>" followed by one line of values.
struct Checkpoint {
  ModelConfig config;
  ParameterVector parameters;
};
void write_checkpoint(std::ostream& out, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// One dataset file per memory slot: <dir>/memory_task<k>.txt.
std::vector<std::filesystem::path> dump_memory(const std::filesystem::path& dir,
                                               const EpisodicMemory& memory, std::size_t vocab_size,
                                               std::size_t input_dim);

// Report CSVs.
inline constexpr const char* kCurveHeader = "step,stage,task,wer,method,policy,budget,seed";
inline constexpr const char* kSummaryHeader =
    "method,policy,budget,seed,averaged_wer,relative_reduction";

void write_curve_csv(std::ostream& out, const RunReport& r, bool header = true);
/// Columns: method,policy,budget,seed,after_stage,task,wer.
void write_matrix_csv(std::ostream& out, const RunReport& r, bool header = true);
void write_summary_csv(std::ostream& out, const RunReport& r, bool header = true);

/// Writes curve.csv, final_matrix.csv, summary.csv into dir.
void write_report(const std::filesystem::path& dir, const RunReport& r);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(std::istream& in);
void write_csv(std::ostream& out, const CsvTable& table);

/// Concatenates tables with identical headers and sorts rows
/// lexicographically, so merging is associative and order-independent.
/// Duplicate rows are kept once.
CsvTable merge_tables(const std::vector<CsvTable>& tables);

/// Adds a `progress` column to a curve table: (stage − 1) + position of the
/// step within its stage's step range, so every stage spans one unit.
CsvTable normalize_stage_width(const CsvTable& curve);

}  // namespace lctc
