use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Abs,
    Exp,
    Log,
    Sqrt,
    Atan,
}

impl UnaryOp {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Self::Abs,
            "exp" => Self::Exp,
            "log" | "ln" => Self::Log,
            "sqrt" => Self::Sqrt,
            "atan" | "arctan" => Self::Atan,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Neg => "-",
            Self::Abs => "abs",
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sqrt => "sqrt",
            Self::Atan => "atan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
            Self::Pow => '^',
        }
    }
}

/// Expression tree over a single coordinate variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var,
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

impl Node {
    pub fn contains_var(&self) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var => true,
            Node::Unary(_, a) => a.contains_var(),
            Node::Binary(_, a, b) => a.contains_var() || b.contains_var(),
        }
    }

    /// Fully parenthesized rendering; reparsing it yields the same tree.
    pub fn display<'a>(&'a self, var: &'a str) -> NodeDisplay<'a> {
        NodeDisplay { node: self, var }
    }
}

pub struct NodeDisplay<'a> {
    node: &'a Node,
    var: &'a str,
}

impl fmt::Display for NodeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            // Debug keeps exponents compact and round-trips exactly.
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var => f.write_str(self.var),
            Node::Unary(UnaryOp::Neg, a) => write!(f, "(-{})", a.display(self.var)),
            Node::Unary(op, a) => write!(f, "{}({})", op.name(), a.display(self.var)),
            Node::Binary(op, a, b) => write!(
                f,
                "({} {} {})",
                a.display(self.var),
                op.symbol(),
                b.display(self.var)
            ),
        }
    }
}
