#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace rieszfrac {

// A finite address w = (w_1, ..., w_n) of the cylinder psi_{w_1} o ... o psi_{w_n}(A).
// Letters are stored 0-based; text I/O uses the 1-based convention.
struct Word {
  std::vector<std::size_t> letters;

  Word() = default;
  explicit Word(std::vector<std::size_t> l) : letters(std::move(l)) {}

  static Word from_one_based(std::initializer_list<int> ls) {
    Word w;
    for (int l : ls) {
      if (l < 1) throw std::invalid_argument("word letters are 1-based");
      w.letters.push_back(static_cast<std::size_t>(l - 1));
    }
    return w;
  }

  std::size_t depth() const noexcept { return letters.size(); }
  bool empty() const noexcept { return letters.empty(); }

  Word extended(std::size_t m) const {
    Word w = *this;
    w.letters.push_back(m);
    return w;
  }

  void check_alphabet(std::size_t num_maps) const {
    for (std::size_t l : letters) {
      if (l >= num_maps) {
        throw std::out_of_range("word letter " + std::to_string(l + 1) +
                                " outside 1.." + std::to_string(num_maps));
      }
    }
  }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < letters.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(letters[i] + 1);
    }
    return s + ")";
  }

  friend bool operator==(const Word&, const Word&) = default;
};

}  // namespace rieszfrac
