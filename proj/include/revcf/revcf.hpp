#pragma once

#include "revcf/cf.hpp"
#include "revcf/corpus.hpp"
#include "revcf/embedding.hpp"
#include "revcf/eval.hpp"
#include "revcf/manifest.hpp"
#include "revcf/textprep.hpp"
