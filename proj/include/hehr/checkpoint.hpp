#pragma once

// Checkpoint file, little-endian:
//
//   "HEHRCKPT"                    8 bytes
//   version                       u16
//   config entry count            u32, then (key, value) strings
//   vocabulary hash               u64
//   |V|, |R|                      u32, u32
//   Adam step counter             u64
//   tensor count                  u32, then per tensor:
//     name                        string
//     rows, cols                  u32, u32
//     values, Adam m, Adam v      rows*cols f64 each
//
// Strings are a u32 byte length followed by the bytes.

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "hehr/graph_store.hpp"
#include "hehr/training.hpp"

namespace hehr {

struct Checkpoint {
  std::map<std::string, std::string> config;
  std::uint64_t vocab_hash = 0;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  ModelState state;
};

void save_checkpoint(std::ostream& out, const ModelState& state,
                     const std::map<std::string, std::string>& config, const VocabMaps& vocab);
void save_checkpoint(const std::string& path, const ModelState& state,
                     const std::map<std::string, std::string>& config, const VocabMaps& vocab);

// Rebuilds the parameter layout from the stored model config and checks
// every stored tensor against it. Throws FormatError / IoFailure.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

// Transductive and shallow checkpoints are tied to their vocabulary; throws
// FormatError on a hash mismatch. Inductive checkpoints accept any vocabulary.
void verify_vocab(const Checkpoint& ckpt, const VocabMaps& vocab);

}  // namespace hehr
