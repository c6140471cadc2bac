#ifndef GFA_GFA_HPP
#define GFA_GFA_HPP

#include "gfa/common.hpp"
#include "gfa/dataset.hpp"
#include "gfa/hyperparameters.hpp"
#include "gfa/io.hpp"
#include "gfa/lbfgs.hpp"
#include "gfa/lowrank_alpha.hpp"
#include "gfa/model_selection.hpp"
#include "gfa/prediction.hpp"
#include "gfa/state.hpp"
#include "gfa/synthetic.hpp"
#include "gfa/vb.hpp"

#endif  // GFA_GFA_HPP
