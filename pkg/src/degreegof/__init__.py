"""Degree-based goodness-of-fit tests for heterogeneous and exchangeable
random graph models."""

from .eg_moments import (ConsistencyError, EgMomentInputs, falling_factorials, m_moments,
                         null_moments, w_phi_identity, w_phi_moments, w_phi_statistic)
from .gof import (DegenerateNullError, LogisticNull, TestResult, fit_logistic_null, power_dv,
                  power_eg, power_her, test_dv_er, test_eg, test_her)
from .graph import Graph, GraphError, count_triangles, read_edge_list, summarize, write_edge_list
from .her_moments import (HerContext, Moments, v_moments_er, v_moments_her, v_statistic,
                          w_moments_her, w_moments_null, w_statistic)
from .models import (BlockConstant, Constant, DegreeCorrected, Grid, PowerG, ProbMatrix, Product,
                     RngSpec, Scaled, TabulatedG, sample_eg, sample_her)
from .patterns import PATTERNS, PhiVector, count_pattern, phi_edd, phi_graphon, phi_sbm, phi_vector

__version__ = "0.1.0"
