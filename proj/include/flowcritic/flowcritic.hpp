#pragma once

// Everything except the HTTP backends (remote.hpp, backends.hpp), which
// pull in the HTTP client and OpenSSL's TLS library.

#include "action.hpp"
#include "actor.hpp"
#include "config.hpp"
#include "critic.hpp"
#include "distill.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "geometry.hpp"
#include "grounding.hpp"
#include "image.hpp"
#include "matching.hpp"
#include "memory.hpp"
#include "policy.hpp"
#include "prompts.hpp"
#include "protocol.hpp"
#include "rollout.hpp"
#include "screen.hpp"
#include "scripted.hpp"
#include "synth.hpp"
#include "task.hpp"
#include "util.hpp"
