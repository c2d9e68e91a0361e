"""Tools around the eigenvalue p-sum product operator.

The central object is the fully nonlinear operator sending a symmetric n x n
matrix A (typically a Hessian) to the product of lambda_{i1} + ... + lambda_{ip}
over all increasing p-tuples of eigenvalue indices.  The package evaluates it
by two independent routes, differentiates it in closed form, samples and tests
its ellipticity cone, reduces it exactly to the elementary symmetric
polynomial basis, numerically certifies the algebraic inequalities it
satisfies, and solves the associated Dirichlet problem with a damped Newton
iteration on a finite-difference grid.
"""

__version__ = "0.1.0"
