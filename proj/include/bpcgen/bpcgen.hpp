// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bpcgen/data/dataset.hpp"
#include "bpcgen/data/pgm.hpp"
#include "bpcgen/data/phantom.hpp"
#include "bpcgen/error.hpp"
#include "bpcgen/eval/colorize.hpp"
#include "bpcgen/eval/evaluate.hpp"
#include "bpcgen/metrics/assignment.hpp"
#include "bpcgen/metrics/chamfer.hpp"
#include "bpcgen/metrics/emd.hpp"
#include "bpcgen/metrics/region_report.hpp"
#include "bpcgen/model/critic.hpp"
#include "bpcgen/model/encoder.hpp"
#include "bpcgen/model/tree_generator.hpp"
#include "bpcgen/nn/adam.hpp"
#include "bpcgen/nn/conv2d.hpp"
#include "bpcgen/nn/tensor.hpp"
#include "bpcgen/ply.hpp"
#include "bpcgen/point_cloud.hpp"
#include "bpcgen/run_config.hpp"
#include "bpcgen/train/checkpoint.hpp"
#include "bpcgen/train/losses.hpp"
#include "bpcgen/train/trainer.hpp"
