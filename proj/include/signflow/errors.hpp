#pragma once

#include <stdexcept>
#include <string>

namespace signflow {

// Base class for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- ingest ----------------------------------------------------------------

class EmptyDatasetError : public Error {
 public:
  explicit EmptyDatasetError(const std::string& root)
      : Error("dataset root contains no class directories: " + root) {}
};

class EmptyClassError : public Error {
 public:
  explicit EmptyClassError(const std::string& class_name)
      : Error("class directory holds no images: " + class_name), class_name(class_name) {}
  std::string class_name;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

// ---- preprocess ------------------------------------------------------------

class InvalidImageError : public Error {
 public:
  using Error::Error;
};

class InvalidPixelRangeError : public Error {
 public:
  using Error::Error;
};

class DegenerateStatsError : public Error {
 public:
  using Error::Error;
};

// ---- split -----------------------------------------------------------------

class StratificationError : public Error {
 public:
  explicit StratificationError(const std::string& class_name, const std::string& detail)
      : Error("stratification infeasible for class '" + class_name + "': " + detail),
        class_name(class_name) {}
  std::string class_name;
};

// ---- model_zoo -------------------------------------------------------------

class UnknownBackboneError : public Error {
 public:
  explicit UnknownBackboneError(const std::string& name)
      : Error("unknown backbone: " + name) {}
};

class WeightsUnavailableError : public Error {
 public:
  using Error::Error;
};

class LayerNotFoundError : public Error {
 public:
  explicit LayerNotFoundError(const std::string& layer_id)
      : Error("layer not found: " + layer_id) {}
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidScalingConstantError : public Error {
 public:
  using Error::Error;
};

// ---- trainer ---------------------------------------------------------------

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& detail)
      : Error("loss diverged at epoch " + std::to_string(epoch) + ": " + detail),
        epoch(epoch) {}
  int epoch;
};

class EmptyTrainSetError : public Error {
 public:
  EmptyTrainSetError() : Error("training set is empty") {}
  explicit EmptyTrainSetError(const std::string& what) : Error(what) {}
};

// ---- metrics ---------------------------------------------------------------

class LabelMismatchError : public Error {
 public:
  using Error::Error;
};

class UnknownClassError : public Error {
 public:
  explicit UnknownClassError(const std::string& label)
      : Error("label not in class list: " + label) {}
};

class EmptyEvaluationError : public Error {
 public:
  EmptyEvaluationError() : Error("confusion matrix holds no samples") {}
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

// ---- gradcam ---------------------------------------------------------------

class InvalidGradientsError : public Error {
 public:
  using Error::Error;
};

// ---- report ----------------------------------------------------------------

class InconsistentReportsError : public Error {
 public:
  using Error::Error;
};

// ---- cli / pipeline --------------------------------------------------------

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field_path, const std::string& detail)
      : Error("config error at " + field_path + ": " + detail), field_path(field_path) {}
  std::string field_path;
};

class DatasetNotFoundError : public Error {
 public:
  explicit DatasetNotFoundError(const std::string& path)
      : Error("dataset root not found: " + path) {}
};

class StageDependencyError : public Error {
 public:
  explicit StageDependencyError(const std::string& missing_file)
      : Error("required upstream artifact missing: " + missing_file), missing_file(missing_file) {}
  std::string missing_file;
};

class ConfigHashMismatchError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace signflow
