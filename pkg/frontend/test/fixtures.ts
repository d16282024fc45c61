/** CSV fixtures shaped exactly like the solver's convergence output. */

export const TEMPORAL_CSV = `# heatsplit_version=0.1.0
# command=convergence --vary time
# master_seed=1010
# n_ref=16
# m_ref=1024
param_kind,param_value,error,std_error,rel_error,ref_norm
tau,0.0625,0.063180261190129719,0.0134399398527,0.35,0.18
tau,0.03125,0.057134,0.00258,0.187,0.30482
tau,0.015625,0.037525,0.00166,0.094,0.39819
tau,0.0078125,0.022371,0.00124,0.085,0.26388
tau,0.00390625,0.012758,0.000598,0.042,0.30482
tau,0.001953125,0.0076403,0.000432,0.025,0.30482
slope,0.6223166613197918,-0.72101591685611288,0.1215932356863378,,
`;

export const SPATIAL_CSV = `# heatsplit_version=0.1.0
# command=convergence --vary space
param_kind,param_value,error,std_error,rel_error,ref_norm
h,0.35355339059327379,0.059391,0.0061,0.120,0.4938
h,0.17677669529663689,0.014873,0.0016,0.030,0.4938
h,0.088388347648318447,0.0031374,0.00032,0.006,0.4938
slope,2.1228580827361604,0.49039119029,0.020353,,
`;

export const WITH_ZERO_ROW_CSV = `# seed=1
param_kind,param_value,error,std_error,rel_error,ref_norm
tau,0.0625,0.06,0.001,0.2,0.3
tau,0.03125,0.03,0.0005,0.1,0.3
tau,0.015625,0,0,0,0.3
`;

export const MISSING_COLUMNS_CSV = `param_kind,param_value,error
tau,0.0625,0.06
`;
