#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dafh/baselines.hpp"
#include "dafh/dataset.hpp"
#include "dafh/models.hpp"
#include "dafh/objective.hpp"

namespace dafh {

inline constexpr int bundle_format_version = 1;

// Self-describing trained-model document: pooled and decoupled classifiers,
// the group assignment source (learned net or partition rule), the schema the
// model was trained on (with its z-score stats), and the training config.
struct ModelBundle {
    std::string method;  // dafh | pooled | trivial | cluster | lr-all | manual
    Schema schema;
    LogisticModel pooled;
    std::vector<LogisticModel> decoupled;
    std::optional<GroupMLP> group_net;
    std::optional<Partition> partition;
    TrainConfig config;

    std::size_t k() const { return decoupled.size(); }
    std::size_t dim() const { return pooled.dim(); }

    // Throws data_error when the dataset was not produced by this bundle's schema.
    void check_compatible(const Dataset& data) const;

    // Hard group index for every row.
    std::vector<std::size_t> assign_all(const Dataset& data) const;
};

ModelBundle bundle_from_system(const TrainedSystem& system, Schema schema,
                               std::string method = "dafh");
ModelBundle bundle_from_partitioned(const PartitionedSystem& system, Schema schema,
                                    std::string method, TrainConfig config = {});
// Single-classifier bundle: everyone in one group served by the pooled model.
ModelBundle bundle_from_pooled(const LogisticModel& pooled, Schema schema,
                               TrainConfig config = {});

TrainedSystem system_from_bundle(const ModelBundle& bundle);

void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

LossTable build_loss_table(const ModelBundle& bundle, const Dataset& data);

}  // namespace dafh
