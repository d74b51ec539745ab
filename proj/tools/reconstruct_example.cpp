// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

// Library walk-through: make one phantom subject, take its axial slice, reconstruct a cloud
// with a trained checkpoint (or freshly initialized toy models), and score it.
//
//   reconstruct_example [checkpoint.ckpt] [out.ply]

#include <cstdio>
#include <iostream>

#include "bpcgen/bpcgen.hpp"

using namespace bpcgen;

int main(int argc, char** argv) {
  try {
    const RunConfig cfg = argc > 1 ? load_checkpoint(argv[1]).config : RunConfig::toy();
    const Models models = argc > 1 ? Models::from_checkpoint(load_checkpoint(argv[1])) : Models::init(cfg);

    PhantomSpec spec = PhantomSpec{}.subject(mix_seed(2026, 0));
    const Volume vol = make_phantom_volume(spec);
    const SliceImage slice = extract_central_slice(vol, cfg.slice_plane);
    const PointCloud target = volume_to_cloud(vol, cfg.generator.point_count);

    const PointCloud pred(models.reconstruct(models.encoder.prepare_input(slice)));
    const EmdResult e = emd(target, pred, cfg.eval.exact_emd_limit, cfg.eval.emd_epsilon);
    std::printf("points %lld  CD %.6g  EMD/N %.6g (%s)\n", static_cast<long long>(pred.count()),
                chamfer_distance(target, pred), e.value / static_cast<double>(pred.count()), to_string(e.method));

    const auto table = region_error_report(pred, target, default_region_boxes());
    for (const auto& r : table.regions)
      std::printf("  %-10s %5lld pts  %s\n", r.name.c_str(), static_cast<long long>(r.member_count),
                  r.mean_error ? std::to_string(*r.mean_error).c_str() : "empty");

    if (argc > 2) {
      export_colored(pred, target, argv[2]);
      std::cout << "wrote " << argv[2] << "\n";
    }
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
