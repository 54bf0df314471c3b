// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "common/vec3.hpp"
#include "oracle/image_method.hpp"

namespace ockm::oracle {

enum class Split : std::uint8_t { Train = 0, Test = 1 };

struct QuerySample {
  Split split = Split::Train;
  Vec3 tx;
  Vec3 rx;
  double frequency = 0.0;  // Hz
  double gain_db = 0.0;
  std::vector<double> order_gain_db;  // LoS first, then orders 1..N_gen
  std::vector<float> spectrum;        // V x Z row-major, linear power

  bool operator==(const QuerySample&) const = default;
};

struct Dataset {
  int V = 18;
  int Z = 36;
  int array_rows = 4;
  int array_cols = 4;
  RoomSpec room;
  std::vector<QuerySample> samples;

  int antennas() const { return array_rows * array_cols; }
  bool operator==(const Dataset& o) const;
};

struct GenerateOptions {
  int train_count = 64;
  int test_count = 16;
  std::vector<double> frequencies{2.4e9, 6e9, 10e9};
  std::uint64_t seed = 1;
  int V = 18;
  int Z = 36;
  int array_rows = 4;
  int array_cols = 4;
  std::size_t max_draws = 100000;
};

// Sample i uses frequencies[i % count]; Tx and Rx are drawn uniformly until
// both clear every wall by lambda and are lambda apart.
Dataset generate_dataset(const RoomSpec& room, const GenerateOptions& options);

QuerySample make_sample(const Vec3& tx, const Vec3& rx, double frequency, const RoomSpec& room, int V, int Z,
                        int rows, int cols);

std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);
void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

// Throws DimensionError when the grid or array differs from the expectation.
void check_dimensions(const Dataset& ds, int V, int Z, int antennas);

std::vector<const QuerySample*> select(const Dataset& ds, Split split);

// Leave-one-frequency-out: training samples exclude the held-out carrier;
// evaluation samples are every sample (either split) at that carrier.
struct FrequencySplit {
  std::vector<const QuerySample*> train;
  std::vector<const QuerySample*> eval;
};
FrequencySplit leave_one_frequency_out(const Dataset& ds, double holdout_hz);

std::vector<double> distinct_frequencies(const Dataset& ds);

// id,split,tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,f_ghz,g_db
std::string metadata_csv(const Dataset& ds);

}  // namespace ockm::oracle
