#include "lctc/io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "lctc/errors.hpp"

namespace lctc {

namespace {

std::string next_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(std::string("unexpected end of input reading ") + what);
  return line;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

long long parse_int(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw FormatError("expected an integer, got '" + s + "'");
  }
  if (pos != s.size()) throw FormatError("expected an integer, got '" + s + "'");
  return v;
}

std::size_t parse_count(const std::string& s) {
  const long long v = parse_int(s);
  if (v < 0) throw FormatError("expected a nonnegative integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

/// "key value" line; returns value.
std::string keyed(std::istream& in, const std::string& key) {
  const auto toks = split_ws(next_line(in, key.c_str()));
  if (toks.size() != 2 || toks[0] != key) throw FormatError("expected '" + key + " <value>'");
  return toks[1];
}

void expect_magic(std::istream& in, const std::string& magic) {
  const auto toks = split_ws(next_line(in, magic.c_str()));
  if (toks.size() != 2 || toks[0] != magic) throw FormatError("missing '" + magic + "' header");
  if (toks[1] != "1") throw FormatError(magic + ": unsupported version " + toks[1]);
}

void write_reals(std::ostream& out, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << format_real(v[i]);
  }
  out << '\n';
}

std::vector<double> read_reals(std::istream& in, std::size_t n) {
  const auto toks = split_ws(next_line(in, "values"));
  if (toks.size() != n) {
    throw FormatError("expected " + std::to_string(n) + " values, got " + std::to_string(toks.size()));
  }
  std::vector<double> v;
  v.reserve(n);
  for (const auto& t : toks) v.push_back(parse_real(t));
  return v;
}

template <class F>
void to_file(const std::filesystem::path& path, F&& write) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write(out);
  if (!out) throw Error("write failed: " + path.string());
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw FormatError("unterminated quote in CSV line");
  out.push_back(std::move(cur));
  return out;
}

std::string run_prefix(const RunReport& r) {
  return r.method + ',' + r.policy + ',' + format_real(r.budget) + ',' + std::to_string(r.seed);
}

}  // namespace

void write_dataset(std::ostream& out, const TaskDataset& ds) {
  out << "lctc-dataset 1\n"
      << "task_id " << ds.task_id << '\n'
      << "vocab_size " << ds.vocab_size << '\n'
      << "input_dim " << ds.input_dim << '\n'
      << "count " << ds.size() << '\n';
  for (const auto& u : ds.utterances) {
    if (u.id.empty() || u.id.find_first_of(" \t\n") != std::string::npos) {
      throw InvalidArgument("write_dataset: utterance id must be a nonempty token: '" + u.id + "'");
    }
    out << "utt " << u.id << ' ' << u.source_task << '\n';
    out << "labels " << u.labels.size();
    for (Label l : u.labels) out << ' ' << l;
    out << '\n' << "frames " << u.frames() << '\n';
    for (std::size_t t = 0; t < u.frames(); ++t) write_reals(out, u.features.row_view(t));
  }
}

TaskDataset read_dataset(std::istream& in) {
  expect_magic(in, "lctc-dataset");
  TaskDataset ds;
  ds.task_id = static_cast<int>(parse_int(keyed(in, "task_id")));
  ds.vocab_size = parse_count(keyed(in, "vocab_size"));
  ds.input_dim = parse_count(keyed(in, "input_dim"));
  const std::size_t count = parse_count(keyed(in, "count"));
  ds.utterances.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Utterance u;
    const auto head = split_ws(next_line(in, "utt"));
    if (head.size() != 3 || head[0] != "utt") throw FormatError("expected 'utt <id> <source_task>'");
    u.id = head[1];
    u.source_task = static_cast<int>(parse_int(head[2]));
    const auto lab = split_ws(next_line(in, "labels"));
    if (lab.size() < 2 || lab[0] != "labels") throw FormatError("expected 'labels <U> ...'");
    const std::size_t len = parse_count(lab[1]);
    if (lab.size() != len + 2) throw FormatError("label count mismatch in " + u.id);
    for (std::size_t i = 0; i < len; ++i) u.labels.push_back(static_cast<Label>(parse_int(lab[i + 2])));
    const std::size_t frames = parse_count(keyed(in, "frames"));
    std::vector<double> data;
    data.reserve(frames * ds.input_dim);
    for (std::size_t t = 0; t < frames; ++t) {
      const auto row = read_reals(in, ds.input_dim);
      data.insert(data.end(), row.begin(), row.end());
    }
    u.features = RealArray(Shape{frames, ds.input_dim}, std::move(data));
    u.validate(ds.input_dim, ds.vocab_size);
    ds.utterances.push_back(std::move(u));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const TaskDataset& ds) {
  to_file(path, [&](std::ostream& o) { write_dataset(o, ds); });
}

TaskDataset load_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  const ModelConfig& c = ck.config;
  out << "lctc-checkpoint 1\n"
      << "model " << c.input_dim << ' ' << c.hidden_dim << ' ' << c.num_layers << ' '
      << (c.bidirectional ? 1 : 0) << ' ' << c.downsample_stride << ' ' << c.vocab_size << ' ' << c.seed << '\n'
      << "segments " << ck.parameters.num_segments() << '\n';
  for (std::size_t i = 0; i < ck.parameters.num_segments(); ++i) {
    const auto& seg = ck.parameters.segment(i);
    out << seg.name << ' ' << seg.shape.size();
    for (auto d : seg.shape) out << ' ' << d;
    out << '\n';
    write_reals(out, ck.parameters.values(i));
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  expect_magic(in, "lctc-checkpoint");
  Checkpoint ck;
  const auto m = split_ws(next_line(in, "model"));
  if (m.size() != 8 || m[0] != "model") throw FormatError("malformed 'model' line");
  ck.config.input_dim = parse_count(m[1]);
  ck.config.hidden_dim = parse_count(m[2]);
  ck.config.num_layers = parse_count(m[3]);
  ck.config.bidirectional = parse_int(m[4]) != 0;
  ck.config.downsample_stride = parse_count(m[5]);
  ck.config.vocab_size = parse_count(m[6]);
  try {
    ck.config.seed = std::stoull(m[7]);
  } catch (const std::exception&) {
    throw FormatError("malformed seed '" + m[7] + "'");
  }
  const std::size_t segs = parse_count(keyed(in, "segments"));
  for (std::size_t i = 0; i < segs; ++i) {
    const auto h = split_ws(next_line(in, "segment"));
    if (h.size() < 2) throw FormatError("malformed segment header");
    const std::size_t rank = parse_count(h[1]);
    if (h.size() != rank + 2) throw FormatError("segment rank mismatch for " + h[0]);
    Shape shape;
    for (std::size_t r = 0; r < rank; ++r) shape.push_back(parse_count(h[r + 2]));
    ck.parameters.add(h[0], RealArray(shape, read_reals(in, shape_size(shape))));
  }
  ck.config.validate();
  const ParameterVector expected = model_init(ck.config);
  if (!expected.congruent(ck.parameters)) {
    throw FormatError("checkpoint parameters do not match the model configuration");
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  to_file(path, [&](std::ostream& o) { write_checkpoint(o, ck); });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_checkpoint(in);
}

std::vector<std::filesystem::path> dump_memory(const std::filesystem::path& dir,
                                               const EpisodicMemory& memory, std::size_t vocab_size,
                                               std::size_t input_dim) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  for (const auto& [task, utts] : memory.slots()) {
    TaskDataset ds{task, vocab_size, input_dim, utts};
    auto path = dir / ("memory_task" + std::to_string(task) + ".txt");
    save_dataset(path, ds);
    files.push_back(std::move(path));
  }
  return files;
}

void write_curve_csv(std::ostream& out, const RunReport& r, bool header) {
  if (header) out << kCurveHeader << '\n';
  for (const auto& p : r.curve) {
    out << p.step << ',' << p.stage << ',' << p.task_id << ',' << format_real(p.wer) << ',' << r.method
        << ',' << r.policy << ',' << format_real(r.budget) << ',' << r.seed << '\n';
  }
}

void write_matrix_csv(std::ostream& out, const RunReport& r, bool header) {
  if (header) out << "method,policy,budget,seed,after_stage,task,wer\n";
  for (std::size_t s = 0; s < r.final_matrix.size(); ++s)
    for (std::size_t t = 0; t < r.task_ids.size(); ++t)
      out << run_prefix(r) << ',' << s + 1 << ',' << r.task_ids[t] << ',' << format_real(r.final_matrix[s][t])
          << '\n';
}

void write_summary_csv(std::ostream& out, const RunReport& r, bool header) {
  if (header) out << kSummaryHeader << '\n';
  out << run_prefix(r) << ',' << format_real(r.averaged_wer) << ','
      << format_real(r.relative_reduction_vs_baseline) << '\n';
}

void write_report(const std::filesystem::path& dir, const RunReport& r) {
  std::filesystem::create_directories(dir);
  to_file(dir / "curve.csv", [&](std::ostream& o) { write_curve_csv(o, r); });
  to_file(dir / "final_matrix.csv", [&](std::ostream& o) { write_matrix_csv(o, r); });
  to_file(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, r); });
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty CSV");
  t.header = parse_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto row = parse_csv_line(line);
    if (row.size() != t.header.size()) {
      throw FormatError("CSV row has " + std::to_string(row.size()) + " fields, header has " +
                        std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_field(fields[i]);
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
}

CsvTable merge_tables(const std::vector<CsvTable>& tables) {
  if (tables.empty()) throw InvalidArgument("merge_tables: nothing to merge");
  CsvTable out;
  out.header = tables.front().header;
  for (const auto& t : tables) {
    if (t.header != out.header) throw FormatError("merge_tables: CSV headers differ");
    out.rows.insert(out.rows.end(), t.rows.begin(), t.rows.end());
  }
  std::sort(out.rows.begin(), out.rows.end());
  out.rows.erase(std::unique(out.rows.begin(), out.rows.end()), out.rows.end());
  return out;
}

CsvTable normalize_stage_width(const CsvTable& curve) {
  auto col = [&](const std::string& name) {
    const auto it = std::find(curve.header.begin(), curve.header.end(), name);
    if (it == curve.header.end()) throw FormatError("curve CSV lacks column '" + name + "'");
    return static_cast<std::size_t>(it - curve.header.begin());
  };
  const std::size_t step_c = col("step"), stage_c = col("stage");
  std::vector<std::size_t> run_cols;
  for (const char* name : {"method", "policy", "budget", "seed"}) run_cols.push_back(col(name));

  // step range of each (run, stage)
  using Key = std::pair<std::vector<std::string>, long long>;
  std::map<Key, std::pair<long long, long long>> range;
  auto key_of = [&](const std::vector<std::string>& row) {
    std::vector<std::string> run;
    for (auto c : run_cols) run.push_back(row[c]);
    return Key{run, parse_int(row[stage_c])};
  };
  for (const auto& row : curve.rows) {
    const long long step = parse_int(row[step_c]);
    auto [it, fresh] = range.try_emplace(key_of(row), step, step);
    if (!fresh) {
      it->second.first = std::min(it->second.first, step);
      it->second.second = std::max(it->second.second, step);
    }
  }
  // a stage starts where the previous one ended
  std::map<Key, long long> start;
  for (const auto& [key, r] : range) {
    const Key prev{key.first, key.second - 1};
    const auto p = range.find(prev);
    start[key] = p == range.end() ? 0 : p->second.second;
  }

  CsvTable out = curve;
  out.header.push_back("progress");
  for (auto& row : out.rows) {
    const Key k = key_of(row);
    const long long s0 = start[k], s1 = range[k].second;
    const long long step = parse_int(row[step_c]);
    const double frac = s1 > s0 ? static_cast<double>(step - s0) / static_cast<double>(s1 - s0) : 1.0;
    row.push_back(format_real(static_cast<double>(k.second - 1) + frac));
  }
  return out;
}

}  // namespace lctc
