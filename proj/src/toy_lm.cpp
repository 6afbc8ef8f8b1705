#include "vlab/toy_lm.hpp"

#include <algorithm>
#include <map>

namespace vlab {

void LmConfig::validate() const {
  require(vocab_size >= 1 && context_len >= 4 && d_model >= 1 && n_layers >= 1 && n_heads >= 1,
          ErrorKind::Configuration, "LM config counts must be >= 1 and context_len >= 4");
  require(d_model % n_heads == 0, ErrorKind::Configuration,
          "d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
}

std::size_t LayerSelector::resolve(std::size_t n_layers) const {
  require(index <= -1 && -static_cast<long>(n_layers) <= index, ErrorKind::Argument,
          "layer selector " + std::to_string(index) + " outside [-" + std::to_string(n_layers) + ", -1]");
  return n_layers + 1 - static_cast<std::size_t>(-index);
}

std::vector<std::string> split_words(const std::string& text) {
  static const std::string punct = ".,;:!?\"()";
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (punct.find(c) != std::string::npos) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  require(!tokens_.empty() && tokens_[0] == "<unk>", ErrorKind::Malformed, "vocabulary must start with <unk>");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const bool fresh = index_.emplace(tokens_[i], static_cast<int>(i)).second;
    require(fresh, ErrorKind::Malformed, "duplicate vocabulary entry '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus, std::size_t max_size) {
  require(max_size >= 2, ErrorKind::Argument, "vocabulary needs room for at least one word");
  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus)
    for (auto& w : split_words(line)) ++counts[w];
  counts.erase("<unk>");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{"<unk>"};
  for (const auto& [w, _] : ranked) {
    if (tokens.size() == max_size) break;
    tokens.push_back(w);
  }
  return Vocabulary(std::move(tokens));
}

int Vocabulary::id(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

ParamLayout::ParamLayout(const LmConfig& c) {
  const auto d = static_cast<Eigen::Index>(c.d_model);
  const auto V = static_cast<Eigen::Index>(c.vocab_size);
  Eigen::Index off = 0;
  auto take = [&](Eigen::Index n) {
    const Eigen::Index at = off;
    off += n;
    return at;
  };
  tok_emb = take(V * d);
  pos_emb = take(static_cast<Eigen::Index>(c.context_len) * d);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    Block b{};
    b.ln1_g = take(d);
    b.ln1_b = take(d);
    b.w_qkv = take(d * 3 * d);
    b.b_qkv = take(3 * d);
    b.w_o = take(d * d);
    b.b_o = take(d);
    b.ln2_g = take(d);
    b.ln2_b = take(d);
    b.w_fc = take(d * 4 * d);
    b.b_fc = take(4 * d);
    b.w_proj = take(4 * d * d);
    b.b_proj = take(d);
    blocks.push_back(b);
  }
  lnf_g = take(d);
  lnf_b = take(d);
  w_out = take(d * V);
  b_out = take(V);
  total = off;
}

template class Transformer<float>;
template class Transformer<double>;

}  // namespace vlab
