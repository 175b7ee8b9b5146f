#pragma once

// Two-period weighted cross-section microdata.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cfdecomp {

enum class ColumnKind { continuous, dummy };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  bool operator==(const Column&) const = default;
};

struct Block {
  std::string name;
  std::vector<std::size_t> columns;  // indices into FactorSchema::columns()
  bool operator==(const Block&) const = default;
};

// Covariate columns and their partition into ordered decomposition blocks.
// Block order is the decomposition sequence: the first block is swapped
// first and is conditioned on all later blocks. Columns that belong to no
// block are carried by the dataset but ignored by every model.
class FactorSchema {
 public:
  FactorSchema() = default;
  // `interactions` lists products of blocked columns (by index) that enter
  // every design whose conditioning set contains all of their factors.
  FactorSchema(std::vector<Column> columns, std::vector<Block> blocks,
               std::vector<std::vector<std::size_t>> interactions = {},
               bool intercept = true);

  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<std::vector<std::size_t>>& interactions() const { return interactions_; }
  bool intercept() const { return intercept_; }

  std::size_t column_index(std::string_view name) const;
  std::size_t block_index(std::string_view name) const;
  std::optional<std::size_t> block_of_column(std::size_t column) const;
  std::vector<std::string> block_names() const;

  // Same columns, blocks permuted into `sequence` (a permutation of the
  // block names).
  FactorSchema reordered(const std::vector<std::string>& sequence) const;

  bool operator==(const FactorSchema&) const = default;

 private:
  std::vector<Column> columns_;
  std::vector<Block> blocks_;
  std::vector<std::vector<std::size_t>> interactions_;
  bool intercept_ = true;
};

struct Observation {
  double outcome = 0.0;
  double weight = 1.0;
  std::string period;
  std::vector<double> covariates;
};

// Row-major per-period storage: row i's covariates are contiguous.
struct PeriodSample {
  std::vector<double> outcome;
  std::vector<double> weight;
  std::vector<double> covariates;  // size() == outcome.size() * width
  std::size_t width = 0;

  std::size_t size() const { return outcome.size(); }
  std::span<const double> row(std::size_t i) const {
    return {covariates.data() + i * width, width};
  }
  double total_weight() const;
  void push_back(double y, double w, std::span<const double> x);
  bool operator==(const PeriodSample&) const = default;
};

// Immutable after construction. Period 0 is the base period, period 1 the
// comparison period; decomposition chains run from comparison back to base.
class Dataset {
 public:
  Dataset(FactorSchema schema, std::array<std::string, 2> periods,
          std::array<PeriodSample, 2> samples);

  static Dataset from_rows(FactorSchema schema, std::array<std::string, 2> periods,
                           const std::vector<Observation>& rows);

  const FactorSchema& schema() const { return schema_; }
  const std::array<std::string, 2>& periods() const { return periods_; }
  std::size_t period_index(std::string_view label) const;
  const PeriodSample& sample(std::size_t period) const { return samples_.at(period); }
  const PeriodSample& sample(std::string_view label) const {
    return samples_[period_index(label)];
  }
  std::size_t size() const { return samples_[0].size() + samples_[1].size(); }
  std::vector<Observation> rows() const;

  Dataset with_samples(std::array<PeriodSample, 2> samples) const;
  Dataset with_schema(FactorSchema schema) const;

  bool operator==(const Dataset&) const = default;

 private:
  FactorSchema schema_;
  std::array<std::string, 2> periods_;
  std::array<PeriodSample, 2> samples_;
};

struct IngestOptions {
  // (base, comparison). When unset, labels are ordered lexicographically.
  std::optional<std::array<std::string, 2>> period_order;
};

struct DropReport {
  std::size_t missing_outcome = 0;
  std::size_t nonpositive_weight = 0;
  std::size_t schema_violation = 0;
  std::size_t total() const { return missing_outcome + nonpositive_weight + schema_violation; }
  bool operator==(const DropReport&) const = default;
};

struct IngestResult {
  Dataset dataset;
  DropReport dropped;
};

// CSV layout: header `outcome,weight,period,<schema column names...>`, one
// observation per row. Rows with a missing or non-finite outcome, a missing
// or nonpositive weight, or a covariate that is missing or violates its
// column kind are dropped and counted. Unparseable numbers and wrong field
// counts are parse errors.
IngestResult ingest_csv(std::istream& in, const FactorSchema& schema,
                        const IngestOptions& options = {});
IngestResult ingest_csv(const std::string& path, const FactorSchema& schema,
                        const IngestOptions& options = {});

// Canonical emitter: base period rows first, shortest round-trip numbers.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::string& path, const Dataset& data);

enum class SdConvention {
  population,  // sum w (x - m)^2 / sum w
  sample,      // population variance * n_eff / (n_eff - 1), Kish n_eff
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

struct DiffSe {
  double diff = 0.0;
  double se = 0.0;
};

// Requires at least two observations and positive total weight.
MeanSd weighted_mean_sd(std::span<const double> values, std::span<const double> weights,
                        SdConvention convention = SdConvention::population);

// `column` is "outcome", "weight" or a schema column name.
MeanSd weighted_mean_sd(const Dataset& data, std::string_view column,
                        std::string_view period,
                        SdConvention convention = SdConvention::population);

// Comparison minus base mean; se = sqrt(sd0^2 / n0 + sd1^2 / n1) with
// population-convention sds and Kish effective sample sizes.
DiffSe weighted_diff_se(const Dataset& data, std::string_view column);

// Kish effective sample size (sum w)^2 / sum w^2.
double effective_sample_size(std::span<const double> weights);

}  // namespace cfdecomp
