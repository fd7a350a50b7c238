#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agentloom/util.hpp"

namespace agentloom {

// Task-scoped key-value memory. Lives for one run: survives replans and
// summarization, never crosses tasks. Keys keep first-write order.
class Scratchpad {
 public:
  struct Note {
    std::string key;
    std::string value;
    int written_at_cycle = 0;
  };

  void set_cycle(int cycle) { cycle_ = cycle; }

  void save_note(const std::string& key, std::string value) {
    if (key.empty()) throw PreconditionViolation("note key must be nonempty");
    for (auto& note : notes_) {
      if (note.key == key) {
        note.value = std::move(value);
        note.written_at_cycle = cycle_;
        return;
      }
    }
    notes_.push_back({key, std::move(value), cycle_});
  }

  // Absent key is a soft absent, not an error.
  std::optional<std::string> read_note(const std::string& key) const {
    for (const auto& note : notes_)
      if (note.key == key) return note.value;
    return std::nullopt;
  }

  std::vector<std::string> list_notes() const {
    std::vector<std::string> keys;
    keys.reserve(notes_.size());
    for (const auto& note : notes_) keys.push_back(note.key);
    return keys;
  }

  const std::vector<Note>& notes() const { return notes_; }
  bool empty() const { return notes_.empty(); }
  void clear() { notes_.clear(); }

 private:
  std::vector<Note> notes_;
  int cycle_ = 0;
};

}  // namespace agentloom
