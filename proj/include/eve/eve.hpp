#pragma once

#include "eve/core/rng.hpp"
#include "eve/core/types.hpp"
#include "eve/diffusion/mixture.hpp"
#include "eve/diffusion/sampler.hpp"
#include "eve/diffusion/schedule.hpp"
#include "eve/eval/posterior.hpp"
#include "eve/eval/report.hpp"
#include "eve/flow/flow.hpp"
#include "eve/mmd/mmd.hpp"
#include "eve/runtime/config.hpp"
#include "eve/runtime/episode.hpp"
#include "eve/runtime/record_io.hpp"
#include "eve/sim/categorize.hpp"
#include "eve/sim/expert.hpp"
#include "eve/sim/policy.hpp"
#include "eve/sim/world.hpp"
#include "eve/verifiers/aggregate.hpp"
#include "eve/verifiers/message.hpp"
#include "eve/verifiers/oracle.hpp"
#include "eve/verifiers/pivot.hpp"
#include "eve/verifiers/primitive_steer.hpp"
#include "eve/verifiers/primitives.hpp"
#include "eve/verifiers/prompt.hpp"
#include "eve/verifiers/verifier.hpp"
#include "eve/vlm/client.hpp"
#include "eve/vlm/http_backend.hpp"
#include "eve/cli/config.hpp"
#include "eve/cli/experiment.hpp"
#include "eve/cli/presets.hpp"
