// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "gpart/trainer.hpp"

namespace gpart {

/// Ten significant digits, shortest form (`%.10g`).
std::string format_number(double value);

/// Header `epoch,train_loss,dev_loss,dev_acc`, one row per epoch.
void write_train_record_csv(const TrainRecord& record, std::ostream& out);

/// One value per line, 17 significant digits so doubles round-trip exactly.
void write_vector_csv(std::span<const double> values, std::ostream& out);

}  // namespace gpart
