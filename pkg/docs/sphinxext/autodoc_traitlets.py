"""autodoc extension for thermocat's configurable classes.

Documents every trait with ``config=True`` and, for the subcommand
applications, the command line option that sets it.
"""

from traitlets import TraitType, Undefined
from sphinx.ext.autodoc import ClassDocumenter, AttributeDocumenter


def _options(cls):
    """Map ``Class.trait`` to the command line options that set it."""
    options = {}
    for key, target in getattr(cls, 'aliases', {}).items():
        target = target[0] if isinstance(target, tuple) else target
        names = key if isinstance(key, tuple) else (key,)
        options.setdefault(target, []).extend('--' + n for n in names)
    return options


class ConfigurableDocumenter(ClassDocumenter):
    """Documents a Configurable with its config traits as members."""
    objtype = 'configurable'
    directivetype = 'class'

    def get_object_members(self, want_all):
        check, members = super().get_object_members(want_all)
        get_traits = (self.object.class_own_traits
                      if self.options.inherited_members
                      else self.object.class_traits)
        options = _options(self.object)
        trait_members = []
        for name, trait in sorted(get_traits(config=True).items()):
            owner = next(c.__name__ for c in self.object.__mro__
                         if name in c.__dict__)
            flags = options.get('%s.%s' % (owner, name), [])
            doc = trait.help
            if flags:
                doc = '%s\n\nCommand line: ``%s``' % (doc, '``, ``'.join(flags))
            trait.__doc__ = doc
            trait_members.append((name, trait))
        return check, trait_members + members


class TraitDocumenter(AttributeDocumenter):
    objtype = 'trait'
    directivetype = 'attribute'
    member_order = 1
    priority = 100

    @classmethod
    def can_document_member(cls, member, membername, isattr, parent):
        return isinstance(member, TraitType)

    def format_name(self):
        return 'config c.' + super().format_name()

    def add_directive_header(self, sig):
        default = self.object.default_value
        default_s = '' if default is Undefined else repr(default)
        sig = ' = {}({})'.format(type(self.object).__name__, default_s)
        return super().add_directive_header(sig)


def setup(app):
    app.add_autodocumenter(ConfigurableDocumenter)
    app.add_autodocumenter(TraitDocumenter)
