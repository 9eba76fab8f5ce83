#include "cdpg/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include "cdpg/errors.hpp"

namespace cdpg {

namespace {

constexpr char kMagic[5] = {'C', 'D', 'P', 'G', '1'};
constexpr uint8_t kTagBigram = 0;
constexpr uint8_t kTagPrefixTree = 1;
constexpr uint8_t kTagLambda = 2;

void put_u64(std::ostream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_i32(std::ostream& out, int32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((static_cast<uint32_t>(v) >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

int32_t get_i32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return static_cast<int32_t>(v);
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

uint8_t read_header(std::istream& in) {
  char magic[5];
  in.read(magic, 5);
  if (!in || !std::equal(magic, magic + 5, kMagic)) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  char tag;
  in.read(&tag, 1);
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  return static_cast<uint8_t>(tag);
}

std::string join_names(const Vocab& v, const std::vector<TokenId>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += v.name(ids[i]);
  }
  return out;
}

const char* featurizer_name(ContextFeaturizer::Mode m) {
  switch (m) {
    case ContextFeaturizer::Mode::ById: return "by-id";
    case ContextFeaturizer::Mode::ByNumeralSet: return "by-numeral-set";
    case ContextFeaturizer::Mode::ByEntitySet: return "by-entity-set";
  }
  return "?";
}

ContextFeaturizer::Mode featurizer_from_name(const std::string& s) {
  if (s == "by-id") return ContextFeaturizer::Mode::ById;
  if (s == "by-numeral-set") return ContextFeaturizer::Mode::ByNumeralSet;
  if (s == "by-entity-set") return ContextFeaturizer::Mode::ByEntitySet;
  throw std::runtime_error("checkpoint: unknown featurizer mode: " + s);
}

void write_sidecar(const Policy& p, const std::string& path) {
  const Vocab& v = p.space().vocab;
  for (const std::string& name : v.tokens) {
    if (name.find_first_of(" \t\n") != std::string::npos) {
      throw std::runtime_error("checkpoint: token names must not contain whitespace");
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << "format = CDPG1-meta\n";
  out << "kind = " << (p.kind() == PolicyKind::Bigram ? "bigram" : "prefix-tree") << "\n";
  out << "max_len = " << p.space().max_len << "\n";
  out << "tokens =";
  for (const std::string& name : v.tokens) out << ' ' << name;
  out << "\n";
  out << "eos = " << v.name(v.eos) << "\n";
  out << "entities = " << join_names(v, v.entity_tokens) << "\n";
  out << "numerals =";
  for (const auto& [num, dig] : v.numeral_pairs) out << ' ' << v.name(num) << ':' << v.name(dig);
  out << "\n";
  if (p.kind() == PolicyKind::Bigram) {
    out << "featurizer = " << featurizer_name(p.featurizer().mode) << "\n";
    out << "id_capacity = " << p.featurizer().id_capacity << "\n";
  }
}

std::map<std::string, std::string> read_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace

void save_policy_checkpoint(const Policy& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, 5);
  const char tag = p.kind() == PolicyKind::Bigram ? static_cast<char>(kTagBigram)
                                                  : static_cast<char>(kTagPrefixTree);
  out.write(&tag, 1);
  if (p.kind() == PolicyKind::Bigram) {
    put_i32(out, p.featurizer().feature_count(p.space().vocab));
    put_i32(out, p.vocab_size());
  } else {
    put_i32(out, static_cast<int32_t>(p.context_ids().size()));
    put_u64(out, p.decision_nodes());
    put_i32(out, p.vocab_size());
    for (int id : p.context_ids()) put_i32(out, id);
  }
  put_u64(out, p.param_count());
  for (double x : p.params()) put_f64(out, x);
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
  out.close();
  write_sidecar(p, path + ".meta");
}

Policy load_policy_checkpoint(const std::string& path) {
  auto kv = read_sidecar(path + ".meta");
  auto need = [&kv](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw std::runtime_error("checkpoint: sidecar missing key " + k);
    return it->second;
  };
  std::vector<std::pair<std::string, std::string>> numerals;
  for (const std::string& pair : split_ws(kv["numerals"])) {
    auto colon = pair.find(':');
    if (colon == std::string::npos) throw std::runtime_error("checkpoint: bad numeral pair");
    numerals.emplace_back(pair.substr(0, colon), pair.substr(colon + 1));
  }
  Vocab vocab = Vocab::make(split_ws(need("tokens")), need("eos"), split_ws(kv["entities"]),
                            numerals);
  SequenceSpace space{std::move(vocab), std::stoi(need("max_len"))};

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  uint8_t tag = read_header(in);
  Policy p = [&]() -> Policy {
    if (tag == kTagBigram) {
      ContextFeaturizer feat;
      feat.mode = featurizer_from_name(need("featurizer"));
      feat.id_capacity = std::stoi(need("id_capacity"));
      int32_t features = get_i32(in);
      int32_t vsize = get_i32(in);
      Policy q = Policy::bigram(std::move(space), feat);
      if (features != feat.feature_count(q.space().vocab) || vsize != q.vocab_size()) {
        throw std::runtime_error("checkpoint: shape mismatch with sidecar");
      }
      return q;
    }
    if (tag == kTagPrefixTree) {
      int32_t n_ctx = get_i32(in);
      uint64_t dn = get_u64(in);
      int32_t vsize = get_i32(in);
      std::vector<int> ids(static_cast<std::size_t>(n_ctx));
      for (auto& id : ids) id = get_i32(in);
      Policy q = Policy::prefix_tree(std::move(space), std::move(ids));
      if (dn != q.decision_nodes() || vsize != q.vocab_size()) {
        throw std::runtime_error("checkpoint: shape mismatch with sidecar");
      }
      return q;
    }
    throw std::runtime_error("checkpoint: not a policy checkpoint");
  }();
  uint64_t count = get_u64(in);
  if (count != p.param_count()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (double& x : p.params_mutable()) x = get_f64(in);
  return p;
}

void save_lambda_table(const std::map<int, double>& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, 5);
  const char tag = static_cast<char>(kTagLambda);
  out.write(&tag, 1);
  put_i32(out, static_cast<int32_t>(table.size()));
  for (const auto& [id, lambda] : table) {
    put_i32(out, id);
    put_f64(out, lambda);
  }
}

std::map<int, double> load_lambda_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  if (read_header(in) != kTagLambda) throw std::runtime_error("checkpoint: not a lambda table");
  int32_t n = get_i32(in);
  std::map<int, double> table;
  for (int32_t i = 0; i < n; ++i) {
    int32_t id = get_i32(in);
    table[id] = get_f64(in);
  }
  return table;
}

}  // namespace cdpg
