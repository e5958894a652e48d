"""The ``thermocat`` command line application.

Each subcommand reproduces one figure or study as CSV tables plus a JSON
manifest in ``--out``.
"""
import json
import math
import os
import sys
import time

import numpy as np
import pyarrow
import scipy
import traitlets
from traitlets import (Bool, Enum, Float, Integer, List, TraitError, Unicode,
                       default)
from traitlets.config import Application, Config, catch_config_error

from . import __version__
from .bell import (DECOHERENCE_CASES, SPLIT_ASYMPTOTE, BellOptimizer,
                   SurvivalSearch, bell_curve_vs_d, bell_curve_vs_V_split)
from .errors import (InvalidParameter, NotConverged, OracleMismatch,
                     ThermocatError)
from .gaussian import (displace, mean_photon, purity, trace, wigner_eval)
from .observables import (fringe_axis, fringe_marginal, fringe_period,
                          fringe_spacing, marginal, marginal_peaks, visibility)
from .oracle import FockOracle
from .reference import success_probability_formula, temperature_of_variance
from .states import (bs_split_superposition, displaced_thermal,
                     lossy_split_superposition, micro_macro_entangled,
                     probability_report, pure_cat, thermal_superposition,
                     two_mode_thermal_entangled)
from .utils import (check_time, check_transmittance, check_variance, parse_sign,
                    write_csv, write_json)


command_aliases = dict(Application.aliases)
command_aliases.update({
    ('V', 'variance'): 'ThermocatCommand.variance',
    ('d', 'displacement'): 'ThermocatCommand.displacement',
    'phi': 'ThermocatCommand.phi',
    'sign': 'ThermocatCommand.sign',
    'transmittance': 'ThermocatCommand.transmittance',
    'gamma-t': 'ThermocatCommand.gamma_t',
    'grid-min': 'ThermocatCommand.grid_min',
    'grid-max': 'ThermocatCommand.grid_max',
    'grid-steps': 'ThermocatCommand.grid_steps',
    'out': 'ThermocatCommand.out',
    'config': 'ThermocatCommand.config_path',
    'threads': 'BellOptimizer.threads',
})


def versions():
    return {'thermocat': __version__, 'numpy': np.__version__,
            'scipy': scipy.__version__, 'traitlets': traitlets.__version__,
            'pyarrow': pyarrow.__version__}


class ThermocatCommand(Application):
    """Shared parameters, validation and output handling of every subcommand."""

    version = __version__

    classes = [BellOptimizer, SurvivalSearch, FockOracle]

    aliases = command_aliases

    variance = Float(
        default_value=100.0,
        config=True,
        help="Phase-space variance V of the thermal state (V = 1 is a coherent state)."
    )

    displacement = Float(
        default_value=100.0,
        config=True,
        help="Displacement d of the thermal state."
    )

    phi = Float(
        default_value=math.pi,
        config=True,
        help="Conditional phase of the cross-Kerr interaction, in radians."
    )

    sign = Unicode(
        default_value='-',
        config=True,
        help="Outcome of the qubit measurement, '+' or '-'."
    )

    transmittance = Float(
        default_value=0.5,
        config=True,
        help="Beam splitter transmittance."
    )

    gamma_t = Float(
        default_value=0.0,
        config=True,
        help="Loss time in units of the inverse damping rate."
    )

    grid_min = Float(
        default_value=None,
        allow_none=True,
        config=True,
        help="Lower end of the output grid. By default chosen from the state."
    )

    grid_max = Float(
        default_value=None,
        allow_none=True,
        config=True,
        help="Upper end of the output grid. By default chosen from the state."
    )

    grid_steps = Integer(
        default_value=2001,
        config=True,
        help="Number of points of the output grid."
    )

    out = Unicode(
        default_value='.',
        config=True,
        help="Directory the tables and the manifest are written to."
    )

    config_path = Unicode(
        default_value='',
        config=True,
        help="""
        A file of ``key=value`` lines. Keys are option names (``variance``,
        ``gamma-t``, ...) or ``Class.trait``. Command line options take
        precedence over the file.
        """
    )

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.results = {}

    @catch_config_error
    def initialize(self, argv=None):
        super().initialize(argv)
        if self.config_path:
            try:
                file_config = self.load_kv_config(self.config_path)
            except ThermocatError as exc:
                self.log.error("%s", exc.message)
                self.exit(exc.exit_code)
            self.update_config(file_config)
            self.update_config(self.cli_config)

    def load_kv_config(self, path):
        """Read ``key=value`` lines into a ``Config``."""
        targets = {}
        for key, target in self.aliases.items():
            target = target[0] if isinstance(target, tuple) else target
            for name in (key if isinstance(key, tuple) else (key,)):
                targets[name] = target
        classes = {cls.__name__: cls
                   for cls in [Application, ThermocatCommand, type(self)] + self.classes}
        config = Config()
        try:
            with open(path, encoding='utf-8') as f:
                lines = f.readlines()
        except OSError as exc:
            raise InvalidParameter("cannot read config file %s: %s" % (path, exc))
        for lineno, line in enumerate(lines, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition('=')
            if not sep:
                raise InvalidParameter("%s:%d: expected key=value" % (path, lineno))
            key, raw = key.strip().lstrip('-'), raw.strip()
            clsname, _, name = targets.get(key, key).rpartition('.')
            cls = classes.get(clsname)
            trait = cls.class_traits(config=True).get(name) if cls else None
            if trait is None:
                raise InvalidParameter("%s:%d: unknown option %r" % (path, lineno, key))
            try:
                if isinstance(trait, List):
                    value = trait.from_string_list([v.strip() for v in raw.split(',')])
                else:
                    value = trait.from_string(raw)
            except (TraitError, ValueError) as exc:
                raise InvalidParameter("%s:%d: bad value for %s: %s"
                                       % (path, lineno, key, exc))
            config[clsname][name] = value
        return config

    def parameters(self):
        names = sorted(set(self.class_trait_names(config=True))
                       - set(Application.class_trait_names(config=True)))
        return {name: getattr(self, name) for name in names}

    def validate(self):
        check_variance(self.variance)
        check_transmittance(self.transmittance)
        check_time(self.gamma_t)
        parse_sign(self.sign)
        if self.grid_steps < 3:
            raise InvalidParameter("grid-steps must be at least 3, got %d"
                                   % self.grid_steps)
        if (self.grid_min is not None and self.grid_max is not None
                and not self.grid_min < self.grid_max):
            raise InvalidParameter("grid-min must be below grid-max")

    @property
    def window(self):
        if self.grid_min is None or self.grid_max is None:
            return None
        return (self.grid_min, self.grid_max)

    def path(self, name):
        return os.path.join(self.out, name)

    def write_manifest(self, wall_time):
        manifest = {'subcommand': self.name, 'parameters': self.parameters(),
                    'versions': versions(), 'summary': self.results}
        write_json(self.path('manifest.json'), manifest)
        write_json(self.path('timing.json'), {'wall_time': wall_time})
        self.log.info("Wrote %s", self.path('manifest.json'))

    def run(self):
        raise NotImplementedError

    def start(self):
        started = time.perf_counter()
        try:
            self.validate()
            os.makedirs(self.out, exist_ok=True)
            self.run()
        except ThermocatError as exc:
            self.log.error("%s", exc.message)
            if self.results:
                self.write_manifest(time.perf_counter() - started)
            self.exit(exc.exit_code)
        self.write_manifest(time.perf_counter() - started)


class Fig1App(ThermocatCommand):
    name = 'thermocat-fig1'
    description = "Quadrature marginals and fringe visibility of a thermal superposition."

    def curve(self, state, theta, axis):
        """A marginal; on the fringe axis the grid resolves the fringes."""
        if math.isclose(math.cos(theta - axis), 1.0, abs_tol=1e-12):
            return fringe_marginal(state, 0, theta, self.window)
        return marginal(state, 0, theta, self.window, self.grid_steps)

    def run(self):
        state = thermal_superposition(self.variance, self.displacement, self.phi,
                                      self.sign)
        axis = fringe_axis(state)
        curves = {'x': self.curve(state, 0.0, axis),
                  'p': self.curve(state, math.pi / 2, axis)}
        for label, curve in curves.items():
            curve.write_csv(self.path('marginal_%s.csv' % label))
        result = visibility(state, 0, axis)
        self.results.update(
            visibility=result.v,
            i_max=result.i_max,
            i_min=result.i_min,
            expected_spacing=fringe_period(state),
            x_peaks=marginal_peaks(curves['x']),
            masses={k: c.mass() for k, c in curves.items()},
        )
        self.results['fringe_spacing'] = fringe_spacing(state, 0, axis)
        self.log.info("Visibility %.6f, fringe spacing %.6g", result.v,
                      self.results['fringe_spacing'])


class Fig2App(ThermocatCommand):
    name = 'thermocat-fig2'
    description = "Wigner functions of both measurement outcomes near the origin."

    @default('displacement')
    def _default_displacement(self):
        return 1.0

    @default('grid_min')
    def _default_grid_min(self):
        return -3.0

    @default('grid_max')
    def _default_grid_max(self):
        return 3.0

    @default('grid_steps')
    def _default_grid_steps(self):
        return 121

    def run(self):
        axis = np.linspace(self.grid_min, self.grid_max, self.grid_steps)
        X, P = np.meshgrid(axis, axis, indexing='ij')
        points = (X + 1j * P).ravel()
        for sign in (1, -1):
            label = 'plus' if sign > 0 else 'minus'
            state = thermal_superposition(self.variance, self.displacement,
                                          self.phi, sign)
            W = wigner_eval(state, points)
            write_csv(self.path('wigner_%s.csv' % label),
                      {'x': X.ravel(), 'p': P.ravel(), 'wigner': W})
            for quadrature, theta in (('x', 0.0), ('p', math.pi / 2)):
                marginal(state, 0, theta).write_csv(
                    self.path('marginal_%s_%s.csv' % (quadrature, label)))
            peak = int(np.argmax(W))
            self.results['origin_%s' % label] = wigner_eval(state, 0)
            self.results['grid_max_%s' % label] = [float(X.ravel()[peak]),
                                                  float(P.ravel()[peak])]

        report = probability_report(self.variance, self.displacement, self.phi)
        oracle = FockOracle(parent=self)
        adjudication = probability_report(5, 1)
        adjudication['P-_oracle'] = oracle.superposition(5, 1, math.pi, -1).probability
        probabilities = {'V=%g,d=%g' % (self.variance, self.displacement): report,
                         'V=5,d=1': adjudication}
        write_json(self.path('probabilities.json'), probabilities)
        self.results['probabilities'] = probabilities


class Fig3App(ThermocatCommand):
    name = 'thermocat-fig3'
    description = "Rotated marginals of a superposition made with a weak interaction."

    @default('variance')
    def _default_variance(self):
        return 5.0

    @default('displacement')
    def _default_displacement(self):
        return 2000.0

    @default('phi')
    def _default_phi(self):
        return math.pi / 1000

    def run(self):
        state = thermal_superposition(self.variance, self.displacement, self.phi,
                                      self.sign)
        axis = fringe_axis(state)
        centre = self.displacement * math.cos(self.phi / 2) * np.exp(1j * self.phi / 2)
        recentred = displace(state, 0, -centre)
        peaks = {}
        for name, st in (('', state), ('recentred_', recentred)):
            for quadrature, theta in (('xprime', axis), ('pprime', axis + math.pi / 2)):
                curve = marginal(st, 0, theta, self.window, self.grid_steps)
                curve.write_csv(self.path('marginal_%s%s.csv' % (name, quadrature)))
                peaks[name + quadrature] = marginal_peaks(curve)
        result = visibility(state, 0, axis)
        self.results.update(visibility=result.v, i_max=result.i_max,
                            i_min=result.i_min, axis_angle=axis, peaks=peaks)
        self.log.info("Visibility %.6f", result.v)


def _raise_unconverged(scans):
    if not all(scan.converged for scan in scans):
        raise NotConverged("some Bell optimisations did not converge")


class Fig4aApp(ThermocatCommand):
    name = 'thermocat-fig4a'
    description = "Optimised Bell violation of two-mode superpositions against d."

    aliases = dict(command_aliases, variances='Fig4aApp.variances',
                   displacements='Fig4aApp.displacements')

    variances = List(
        Float(),
        default_value=[1.0, 100.0, 1000.0],
        config=True,
        help="Variances scanned; V = 1 is the pure entangled coherent state."
    )

    displacements = List(
        Float(),
        default_value=[0.0, 10.0, 30.0, 100.0, 300.0],
        config=True,
        help="Displacements scanned for each variance."
    )

    @default('sign')
    def _default_sign(self):
        return '+'

    def run(self):
        optimizer = BellOptimizer(parent=self)
        scans = []
        for V in self.variances:
            scan = bell_curve_vs_d(V, self.displacements, self.sign, optimizer,
                                   self.phi)
            scan.write_csv(self.path('fig4a_V%g.csv' % V))
            self.results['V=%g' % V] = {'b_max': list(scan.values),
                                        'monotone': scan.monotone}
            scans.append(scan)
        _raise_unconverged(scans)


class Fig4bApp(ThermocatCommand):
    name = 'thermocat-fig4b'
    description = "Optimised Bell violation of split d = 0 superpositions against V."

    aliases = dict(command_aliases, variances='Fig4bApp.variances')

    variances = List(
        Float(),
        default_value=[1.0, 10.0, 100.0, 1000.0],
        config=True,
        help="Variances scanned; V = 1 is excluded as the vacuum."
    )

    @default('displacement')
    def _default_displacement(self):
        return 0.0

    @default('sign')
    def _default_sign(self):
        return '+'

    def run(self):
        scan = bell_curve_vs_V_split(self.variances, self.displacement, self.sign,
                                     BellOptimizer(parent=self))
        scan.write_csv(self.path('fig4b.csv'))
        self.results.update(b_max=list(scan.values), asymptote=SPLIT_ASYMPTOTE,
                            final_gap=SPLIT_ASYMPTOTE - scan.values[-1])
        _raise_unconverged([scan])


class DecoherenceApp(ThermocatCommand):
    name = 'thermocat-decoherence'
    description = "Loss time at which the Bell violation of split states disappears."

    case = Enum(
        sorted(DECOHERENCE_CASES) + ['custom', 'all'],
        default_value='all',
        config=True,
        help="""
        Which study to run. ``custom`` uses --variance, --displacement and
        --sign for a split superposition.
        """
    )

    aliases = dict(command_aliases, case='DecoherenceApp.case')

    def _factories(self):
        if self.case == 'custom':
            V, d, sign = self.variance, self.displacement, self.sign
            return {'custom': lambda gt: lossy_split_superposition(V, d, sign, gt,
                                                                   self.phi)}
        names = sorted(DECOHERENCE_CASES) if self.case == 'all' else [self.case]
        return {name: DECOHERENCE_CASES[name].factory for name in names}

    def run(self):
        search = SurvivalSearch(parent=self, optimizer=BellOptimizer(parent=self))
        table = {'case': [], 'gamma_t': [], 'quoted': [], 'ratio': [],
                 'bracketed': []}
        for name, factory in self._factories().items():
            result = search.search(factory)
            write_csv(self.path('decoherence_%s.csv' % name), result.columns())
            summary = {'gamma_t': result.gamma_t, 'bracketed': result.bracketed}
            quoted = math.nan
            if name in DECOHERENCE_CASES:
                case = DECOHERENCE_CASES[name]
                quoted = case.quoted
                summary.update(expected=case.expected, quoted=quoted,
                               ratio=quoted / result.gamma_t,
                               within=abs(result.gamma_t - case.expected)
                               <= case.tolerance)
                self.log.info("%s: quoted gamma t %.2f is %.2f times the computed one",
                              name, quoted, quoted / result.gamma_t)
            row = dict(case=name, gamma_t=result.gamma_t, quoted=quoted,
                       ratio=quoted / result.gamma_t, bracketed=result.bracketed)
            for key, value in row.items():
                table[key].append(value)
            self.results[name] = summary
            self.log.info("%s: violation lost at gamma t = %.4f", name, result.gamma_t)
        write_csv(self.path('decoherence_summary.csv'), table)


class OracleCheckApp(ThermocatCommand):
    name = 'thermocat-oracle-check'
    description = "Compare closed-form values against the Fock-space oracle."

    aliases = dict(command_aliases, seed='OracleCheckApp.seed',
                   points='OracleCheckApp.points')

    seed = Integer(
        default_value=7,
        config=True,
        help="Seed of the random phase points and settings."
    )

    points = Integer(
        default_value=20,
        config=True,
        help="Random phase points per single-mode state."
    )

    def run(self):
        rows = FockOracle(parent=self).check(seed=self.seed, points=self.points)
        table = [row.as_row() for row in rows]
        write_csv(self.path('oracle_check.csv'),
                  {key: [row[key] for row in table] for key in table[0]})
        failed = [row for row in rows if not row.ok]
        self.results.update(checks=len(rows), mismatches=len(failed))
        if failed:
            raise OracleMismatch("%d of %d oracle checks failed"
                                 % (len(failed), len(rows)))


class StateInfoApp(ThermocatCommand):
    name = 'thermocat-state-info'
    description = "Trace, purity, mean photon numbers and temperature of a state."

    state = Enum(
        ['thermal', 'superposition', 'micro-macro', 'two-mode', 'split', 'cat',
         'lossy-split'],
        default_value='superposition',
        config=True,
        help="Which constructor to build the state with."
    )

    print_json = Bool(
        default_value=True,
        config=True,
        help="Also print the summary as JSON on standard output."
    )

    aliases = dict(command_aliases, state='StateInfoApp.state')

    @default('displacement')
    def _default_displacement(self):
        return 1.0

    def build(self):
        V, d, phi, sign = self.variance, self.displacement, self.phi, self.sign
        if self.state == 'thermal':
            return displaced_thermal(V, d)
        if self.state == 'superposition':
            return thermal_superposition(V, d, phi, sign)
        if self.state == 'micro-macro':
            return micro_macro_entangled(V, d, phi)
        if self.state == 'two-mode':
            return two_mode_thermal_entangled(V, d, sign, phi)
        if self.state == 'split':
            return bs_split_superposition(V, d, phi, sign, self.transmittance)
        if self.state == 'cat':
            return pure_cat(d, sign)
        return lossy_split_superposition(V, d, sign, self.gamma_t, phi,
                                         self.transmittance)

    def run(self):
        state = self.build()
        p = purity(state)
        self.results.update(
            state=self.state,
            modes=state.num_modes,
            qubit=state.has_qubit,
            trace=trace(state),
            purity=p,
            linear_entropy=1 - p,
            mean_photon=[mean_photon(state, m) for m in range(state.num_modes)],
            temperature=temperature_of_variance(self.variance),
        )
        if self.state in ('superposition', 'micro-macro'):
            plus, minus = success_probability_formula(self.variance, self.displacement)
            self.results['P_formula'] = {'+': plus, '-': minus}
        write_json(self.path('state_info.json'), self.results)
        if self.print_json:
            json.dump(self.results, sys.stdout, indent=2, sort_keys=True,
                      default=str)
            sys.stdout.write('\n')


class ThermocatApp(Application):
    name = 'thermocat'
    version = __version__
    description = "Thermal-state superpositions: figures, Bell tests and oracle checks."

    subcommands = {
        'fig1': (Fig1App, Fig1App.description),
        'fig2': (Fig2App, Fig2App.description),
        'fig3': (Fig3App, Fig3App.description),
        'fig4a': (Fig4aApp, Fig4aApp.description),
        'fig4b': (Fig4bApp, Fig4bApp.description),
        'decoherence': (DecoherenceApp, DecoherenceApp.description),
        'oracle-check': (OracleCheckApp, OracleCheckApp.description),
        'state-info': (StateInfoApp, StateInfoApp.description),
    }

    def initialize_subcommand(self, subc, argv=None):
        cls, _ = self.subcommands[subc]
        self.subapp = cls(parent=self)
        self.subapp.initialize(argv)

    def start(self):
        if self.subapp is None:
            self.print_subcommands()
            self.exit(2)
        return self.subapp.start()


def main(argv=None):
    app = ThermocatApp()
    app.initialize(argv)
    app.start()
    return 0


if __name__ == '__main__':
    sys.exit(main())
