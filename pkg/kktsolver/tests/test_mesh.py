import numpy as np
from django.test import SimpleTestCase

from kktsolver.exceptions import InvalidDimensionError, MeshOverflowError
from kktsolver.fem_assembly import interpolate
from kktsolver.mesh import (
    UNIT_SQUARE,
    Mesh,
    build_rect_mesh,
    build_refined_mesh,
    hierarchy,
    prolongation,
    refine,
)

SQUARE = (-1.0, 1.0, -1.0, 1.0)


class BuildRectMeshTests(SimpleTestCase):

    def test_smallest_mesh(self):
        mesh = build_rect_mesh(1, 1, UNIT_SQUARE)
        self.assertEqual(mesh.n_nodes, 4)
        self.assertEqual(mesh.n_elements, 2)
        self.assertEqual(len(mesh.boundary_nodes), 4)

    def test_two_by_two_has_one_interior_node(self):
        mesh = build_rect_mesh(2, 2, UNIT_SQUARE)
        self.assertEqual(mesh.n_nodes, 9)
        self.assertEqual(len(mesh.boundary_nodes), 8)
        np.testing.assert_array_equal(mesh.interior_nodes(), [4])
        np.testing.assert_array_equal(mesh.nodes[4], [0.5, 0.5])

    def test_benchmark_resolution(self):
        mesh = build_rect_mesh(32, 32, SQUARE)
        self.assertEqual(mesh.n_nodes, 1089)
        self.assertEqual(mesh.n_elements, 2 * 32 * 32)
        self.assertEqual(len(mesh.boundary_nodes), 2 * (32 + 32))

    def test_boundary_nodes_lie_on_the_rectangle_boundary(self):
        mesh = build_rect_mesh(5, 3, (0.0, 2.0, 1.0, 4.0))
        x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
        on_edge = (x == 0.0) | (x == 2.0) | (y == 1.0) | (y == 4.0)
        np.testing.assert_array_equal(np.flatnonzero(on_edge), mesh.boundary_nodes)
        self.assertEqual(len(mesh.boundary_nodes), 2 * (5 + 3))

    def test_row_major_numbering(self):
        mesh = build_rect_mesh(4, 2, UNIT_SQUARE)
        np.testing.assert_array_equal(mesh.nodes[1], [0.25, 0.0])
        np.testing.assert_array_equal(mesh.nodes[5], [0.0, 0.5])

    def test_areas_positive_and_sum_to_domain_area(self):
        for nx, ny, domain in [(1, 1, UNIT_SQUARE), (7, 3, SQUARE), (16, 16, (0.0, 2.0, 0.0, 2.0))]:
            mesh = build_rect_mesh(nx, ny, domain)
            areas = mesh.element_areas()
            self.assertTrue(np.all(areas > 0))
            self.assertLessEqual(abs(areas.sum() - mesh.area) / mesh.area, 1e-13)

    def test_cells_split_along_lower_left_to_upper_right_diagonal(self):
        mesh = build_rect_mesh(1, 1, UNIT_SQUARE)
        np.testing.assert_array_equal(mesh.elements, [[0, 1, 3], [0, 3, 2]])

    def test_invalid_dimensions(self):
        with self.assertRaises(InvalidDimensionError):
            build_rect_mesh(0, 3, UNIT_SQUARE)
        with self.assertRaises(InvalidDimensionError):
            build_rect_mesh(2, -1, UNIT_SQUARE)
        with self.assertRaises(InvalidDimensionError):
            build_rect_mesh(2, 2, (0.0, 0.0, 0.0, 1.0))
        with self.assertRaises(InvalidDimensionError):
            build_rect_mesh(2, 2, (0.0, 1.0, 2.0, 1.0))

    def test_mesh_arrays_are_read_only(self):
        mesh = build_rect_mesh(2, 2, UNIT_SQUARE)
        with self.assertRaises(ValueError):
            mesh.nodes[0, 0] = 5.0


class RefineTests(SimpleTestCase):

    def test_refine_doubles_cell_counts(self):
        once = refine(build_rect_mesh(1, 1, UNIT_SQUARE))
        twice = refine(once)
        self.assertEqual((once.nx, once.ny, once.n_nodes), (2, 2, 9))
        self.assertEqual((twice.nx, twice.ny, twice.n_nodes), (4, 4, 25))
        self.assertEqual(twice.level, 2)
        self.assertIs(twice.parent, once)

    def test_coarse_nodes_coincide_bit_exactly_with_fine_nodes(self):
        for domain in [UNIT_SQUARE, SQUARE, (0.0, 2.0, 0.0, 2.0), (0.1, 0.7, -0.3, 1.9)]:
            coarse = build_rect_mesh(3, 5, domain)
            fine = refine(coarse)
            np.testing.assert_array_equal(fine.nodes[fine.parent_nodes], coarse.nodes)

    def test_refine_overflow(self):
        huge = 2 ** 40
        empty = np.zeros((0, 2))
        mesh = Mesh(nx=huge, ny=huge, domain=UNIT_SQUARE, nodes=empty,
                    elements=np.zeros((0, 3), dtype=np.int64),
                    boundary_nodes=np.zeros(0, dtype=np.int64))
        with self.assertRaises(MeshOverflowError):
            refine(mesh)

    def test_build_refined_mesh_keeps_the_hierarchy(self):
        mesh = build_refined_mesh(4, SQUARE, coarse_cells=2)
        self.assertEqual((mesh.nx, mesh.ny), (16, 16))
        self.assertEqual([m.nx for m in hierarchy(mesh)], [2, 4, 8, 16])

    def test_build_refined_mesh_rejects_unreachable_sizes(self):
        with self.assertRaises(InvalidDimensionError):
            build_refined_mesh(1, SQUARE, coarse_cells=4)
        with self.assertRaises(InvalidDimensionError):
            build_refined_mesh(3, SQUARE, coarse_cells=3)


class ProlongationTests(SimpleTestCase):

    def setUp(self):
        self.coarse = build_rect_mesh(4, 4, SQUARE)
        self.fine = refine(self.coarse)
        self.P = prolongation(self.coarse, self.fine)

    def _deep_interior(self):
        nf = self.fine.nx
        i = np.arange(self.fine.n_nodes) % (nf + 1)
        j = np.arange(self.fine.n_nodes) // (nf + 1)
        return np.flatnonzero((i >= 2) & (i <= nf - 2) & (j >= 2) & (j <= nf - 2))

    def test_shape_and_boundary_restriction(self):
        self.assertEqual(self.P.shape, (self.fine.n_nodes, self.coarse.n_nodes))
        dense = self.P.toarray()
        self.assertEqual(np.abs(dense[self.fine.boundary_nodes]).sum(), 0.0)
        self.assertEqual(np.abs(dense[:, self.coarse.boundary_nodes]).sum(), 0.0)

    def test_injection_at_coarse_nodes(self):
        for c in self.coarse.interior_nodes():
            self.assertEqual(self.P[self.fine.parent_nodes[c], c], 1.0)

    def test_constants_preserved_away_from_the_boundary(self):
        values = self.P @ np.ones(self.coarse.n_nodes)
        np.testing.assert_allclose(values[self._deep_interior()], 1.0, atol=1e-15)

    def test_linear_functions_reproduced(self):
        f = lambda x, y: 2.0 * x - 3.0 * y + 0.5
        values = self.P @ interpolate(self.coarse, f)
        deep = self._deep_interior()
        np.testing.assert_allclose(values[deep], interpolate(self.fine, f)[deep], atol=1e-14)

    def test_rejects_non_nested_pair(self):
        with self.assertRaises(InvalidDimensionError):
            prolongation(self.coarse, build_rect_mesh(6, 6, SQUARE))
