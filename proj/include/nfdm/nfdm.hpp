#pragma once

#include "nfdm/channel.hpp"
#include "nfdm/core.hpp"
#include "nfdm/fft.hpp"
#include "nfdm/nft_forward.hpp"
#include "nfdm/nft_inverse.hpp"
#include "nfdm/parallel.hpp"
#include "nfdm/random.hpp"
#include "nfdm/scenario.hpp"
#include "nfdm/transceiver.hpp"
