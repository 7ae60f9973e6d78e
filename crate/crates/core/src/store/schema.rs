//! Table definitions and seed rows.

/// The twenty core tables, in creation order.
pub const CORE_TABLES: [&str; 20] = [
    "acls",
    "affiliations",
    "building",
    "categories",
    "fieldlist",
    "inventories",
    "itemproperties",
    "itempropertylist",
    "items",
    "locations",
    "locationtypes",
    "logs",
    "permissions",
    "professionaltitles",
    "requests",
    "requesttypes",
    "tablelist",
    "userinfo",
    "userroles",
    "users",
];

/// Tables that back workflows the core schema has no home for.
pub const EXTENSION_TABLES: [&str; 3] = [
    "ext_error_reports",
    "ext_error_annotations",
    "ext_request_comments",
];

pub const EXTENSION_PREFIX: &str = "ext_";

pub(crate) const DDL: &str = r#"
CREATE TABLE acls (
    user_role_id INTEGER NOT NULL PRIMARY KEY,
    permission INTEGER
);
CREATE TABLE affiliations (
    affln_id INTEGER NOT NULL PRIMARY KEY,
    affln_name TEXT,
    affln_code TEXT,
    parent_affln_id INTEGER
);
CREATE TABLE building (
    bldg_id INTEGER PRIMARY KEY AUTOINCREMENT,
    bldg_code TEXT,
    bldg_name TEXT
);
CREATE TABLE categories (
    cat_id INTEGER PRIMARY KEY AUTOINCREMENT,
    parent_cat_id TEXT,
    description TEXT
);
CREATE TABLE fieldlist (
    field_id INTEGER NOT NULL,
    table_id INTEGER NOT NULL DEFAULT 0,
    field_code TEXT,
    field_name TEXT,
    permissions INTEGER,
    PRIMARY KEY (field_id, table_id)
);
CREATE TABLE inventories (
    item_id INTEGER NOT NULL PRIMARY KEY,
    qty INTEGER,
    status TEXT,
    modified_by INTEGER,
    date_modified TEXT
);
CREATE TABLE itemproperties (
    item_prop_id INTEGER PRIMARY KEY AUTOINCREMENT,
    item_id INTEGER,
    prop_id INTEGER,
    prop_value TEXT
);
CREATE TABLE itempropertylist (
    prop_id INTEGER PRIMARY KEY AUTOINCREMENT,
    cat_id INTEGER,
    prop_name TEXT,
    default_value TEXT,
    required INTEGER NOT NULL DEFAULT 0,
    numeric_cap_of INTEGER
);
CREATE TABLE items (
    item_id INTEGER PRIMARY KEY AUTOINCREMENT,
    item_description TEXT,
    code TEXT,
    group_id INTEGER,
    serial_number TEXT,
    cat_id INTEGER,
    owner_id INTEGER,
    loc_id INTEGER,
    date_modified TEXT,
    status TEXT
);
CREATE TABLE locations (
    loc_id INTEGER PRIMARY KEY AUTOINCREMENT,
    parent_loc_id INTEGER,
    loc_code TEXT,
    loc_name TEXT,
    bldg_id INTEGER,
    affln_id INTEGER,
    status TEXT,
    loc_type_id INTEGER,
    comment TEXT,
    seats INTEGER,
    capacity INTEGER
);
CREATE TABLE locationtypes (
    loc_type_id INTEGER PRIMARY KEY AUTOINCREMENT,
    loc_type_name TEXT,
    description TEXT
);
CREATE TABLE logs (
    log_id INTEGER PRIMARY KEY AUTOINCREMENT,
    log_time TEXT,
    user_id INTEGER,
    item_id INTEGER,
    event_type TEXT,
    content TEXT
);
CREATE TABLE permissions (
    permission_id INTEGER NOT NULL PRIMARY KEY,
    description TEXT
);
CREATE TABLE professionaltitles (
    title_id INTEGER NOT NULL PRIMARY KEY,
    title_name TEXT,
    permission INTEGER
);
CREATE TABLE requests (
    req_id INTEGER PRIMARY KEY AUTOINCREMENT,
    requester INTEGER,
    request_type INTEGER,
    submitted_by INTEGER,
    item_id INTEGER,
    description TEXT,
    date_submitted TEXT,
    approved_by INTEGER,
    date_approved TEXT,
    status TEXT,
    date_modified TEXT
);
CREATE TABLE requesttypes (
    req_type_id INTEGER NOT NULL PRIMARY KEY,
    req_type_code TEXT,
    description TEXT,
    permission INTEGER
);
CREATE TABLE tablelist (
    table_id INTEGER PRIMARY KEY AUTOINCREMENT,
    table_code TEXT,
    table_name TEXT,
    permissions INTEGER
);
CREATE TABLE userinfo (
    user_id INTEGER NOT NULL PRIMARY KEY,
    email TEXT,
    dob TEXT,
    home_phone TEXT,
    cell_phone TEXT,
    street_address TEXT
);
CREATE TABLE userroles (
    user_role_id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_id INTEGER,
    title_id INTEGER,
    affln_id INTEGER,
    status TEXT
);
CREATE TABLE users (
    user_id INTEGER PRIMARY KEY AUTOINCREMENT,
    user_code TEXT,
    last_name TEXT,
    first_name TEXT,
    password TEXT,
    date_modified TEXT,
    login_attempts INTEGER,
    loc_id INTEGER
);
CREATE TABLE ext_error_reports (
    error_id INTEGER PRIMARY KEY AUTOINCREMENT,
    occurred_at TEXT NOT NULL,
    source TEXT NOT NULL,
    severity TEXT NOT NULL,
    message TEXT NOT NULL,
    detail TEXT,
    affln_id INTEGER
);
CREATE TABLE ext_error_annotations (
    annotation_id INTEGER PRIMARY KEY AUTOINCREMENT,
    error_id INTEGER NOT NULL,
    author_id INTEGER NOT NULL,
    created_at TEXT NOT NULL,
    comment TEXT NOT NULL
);
CREATE TABLE ext_request_comments (
    comment_id INTEGER PRIMARY KEY AUTOINCREMENT,
    req_id INTEGER NOT NULL,
    author_id INTEGER NOT NULL,
    created_at TEXT NOT NULL,
    kind TEXT NOT NULL,
    comment TEXT NOT NULL
);
"#;

/// Seed rows. Column names are normalized; values are as dumped, except the
/// admin password which is inserted separately as a salted hash.
pub(crate) const SEED: &str = r#"
INSERT INTO acls (user_role_id, permission) VALUES (1, 2048);

INSERT INTO affiliations (affln_id, affln_name, affln_code, parent_affln_id) VALUES
(0, 'UUIS', 'UUIS', NULL),
(1, 'Arts and Science', 'ASF', 0),
(2, 'Computer Science', 'CSF', 0),
(3, 'Engineering', 'EN', 0),
(10, 'History', 'HIS', 1),
(11, 'Religion', 'REL', 1),
(12, 'Visual Arts', 'VA', 1),
(13, 'Math', 'MA', 1),
(20, 'SOEN', 'SOEN', 2),
(21, 'CS', 'CS', 2),
(30, 'ECE', 'ECE', 3),
(31, 'MIE', 'MIE', 3);

INSERT INTO building (bldg_id, bldg_code, bldg_name) VALUES
(0, 'N/A', 'N/A'),
(1, 'Hall', 'Hall Building'),
(2, 'EV', NULL),
(3, 'FB', 'Fabien'),
(4, 'MB', NULL);
UPDATE sqlite_sequence SET seq = 5 WHERE name = 'building';

INSERT INTO categories (cat_id, parent_cat_id, description) VALUES
(0, 'N/A', 'N/A'),
(1, '1', 'Computer'),
(2, '1', 'Mouse'),
(3, NULL, 'Printer');
UPDATE sqlite_sequence SET seq = 4 WHERE name = 'categories';

INSERT INTO inventories (item_id, qty, status, modified_by, date_modified) VALUES
(20, 2, NULL, NULL, NULL),
(21, 3, NULL, NULL, NULL),
(22, 4, NULL, NULL, NULL),
(23, 5, NULL, NULL, NULL),
(329, 1, NULL, NULL, NULL);

INSERT INTO itemproperties (item_prop_id, item_id, prop_id, prop_value) VALUES
(1, 20, 1, 'Dell9000'),
(2, 21, 1, 'Dell9000'),
(3, 22, 1, 'Dell9000'),
(4, 23, 2, 'HP 4200'),
(5, 329, 1, 'Dell9000');

INSERT INTO itempropertylist (prop_id, cat_id, prop_name, default_value) VALUES
(1, 1, 'Desktop', NULL),
(2, 3, 'Desktop Laser', NULL);

INSERT INTO items (item_id, item_description, code, group_id, serial_number, cat_id, owner_id, loc_id, date_modified, status) VALUES
(0, 'N/A', 'N/A', 576, 'N/A', 0, 0, 3, '2010-05-02 19:50:24', 'stolen'),
(3, 'desktop', 'UUIS000001', 333, 'abcdefg', 1, 1, 1, '0000-00-00 00:00:00', 'inactive'),
(4, 'Dell00001', 'UUIS000002', 5555555, 'abcdefg', 2, 1, 2, '0000-00-00 00:00:00', 'inactive'),
(5, 'aa', 'aa', 576, 'aa', 1, 0, 3, '2010-05-02 19:50:24', 'stolen'),
(6, 'desktop', 'UUIS000001', 5555555, 'abcdefg', 1, 1, 1, '0000-00-00 00:00:00', 'inactive'),
(7, 'demo1', 'DEMO0001', 5555555, '1000demo', 2, 0, 1, '0000-00-00 00:00:00', 'inactive'),
(8, 'demo2', 'DEMO0001', 576, '2000demo', 2, 0, 3, '2010-05-02 19:50:24', 'stolen'),
(9, 'demo3', 'DEMO0003', 0, '3000demo', 2, 0, 1, '0000-00-00 00:00:00', 'inactive'),
(10, 'demo4', 'DEMO0004', 0, '4000demo', 2, 0, 3, '0000-00-00 00:00:00', 'inactive'),
(11, 'demo5', 'DEMO0005', 2147483647, '5000demo', 2, 0, 3, '2010-05-02 20:14:13', 'active'),
(12, 'demo6', 'DEMO0006', 2147483647, '6000demo', 2, 0, 1, '0000-00-00 00:00:00', 'inactive'),
(13, 'demo7', 'DEMO0007', 0, '7000demo', 2, 0, 2, '0000-00-00 00:00:00', 'stolen'),
(14, 'demo8', 'DEMO0008', 0, '8000demo', 2, 0, 2, '0000-00-00 00:00:00', 'stolen'),
(15, 'demo10', 'DEMO00010', 0, '10000demo', 2, 0, 2, '0000-00-00 00:00:00', 'stolen'),
(16, 'demo3', 'DEMO0003', 0, '3000demo', 2, 0, 2, '0000-00-00 00:00:00', 'stolen'),
(17, '333333333', '333333333', 2147483647, '33333333', 1, 333333, 2, '0000-00-00 00:00:00', 'stolen'),
(18, 'qqqqq', 'qqqqq', 0, 'qqqq', 1, 0, 1, '0000-00-00 00:00:00', 'active'),
(19, '', '', 0, ' ', 0, 0, 0, '0000-00-00 00:00:00', ''),
(20, 'Dell tower 1', 'UUIS000002', NULL, 'a0002', 1, 3, 3, '2010-05-02 13:37:34', NULL),
(21, 'Dell tower 2', 'UUIS000003', NULL, 'a0003', 1, 21, 4, '2010-05-02 13:37:34', NULL),
(22, 'Dell tower 3', 'UUIS000004', NULL, 'a0004', 1, 20, 5, '2010-05-02 13:37:34', NULL),
(23, 'Marker', 'UUIS000005', NULL, 'a0005', 3, 21, 6, '2010-05-02 13:37:34', NULL),
(24, '66666', '66666', 66666, '666666', 2, 6666, 4, '0000-00-00 00:00:00', 'active'),
(25, 'uuuu', 'uuuu', 0, 'uuuu ', 1, 0, 1, '0000-00-00 00:00:00', 'active'),
(27, '999', '999', 999, '999', 1, 999, 2, '0000-00-00 00:00:00', 'lent'),
(28, '22222', '22222', 22222, '22 ', 1, 222222, 2, '0000-00-00 00:00:00', 'inactive'),
(30, '', '', 0, '2222DEMO', 0, 0, 0, '0000-00-00 00:00:00', ''),
(31, 'Table1', '', 0, '11111DEMO', 1, 0, 2, '0000-00-00 00:00:00', 'active'),
(32, 'speaker', 'DEMO0002022', 3, '222222DEMO', 1, 222, 0, '2010-05-02 00:08:26', ''),
(33, 'mobile', 'DEMO33333', 5, '222222DEMO', 1, 433, 2, '2010-05-02 00:17:03', 'active'),
(34, 'desktop Dell 1', 'UUIS000001', NULL, 'a0001', NULL, NULL, NULL, NULL, NULL),
(35, 'ppppp', 'DEMO234445', 5, '6778899DEMO', 1, 555, 2, '2010-05-02 18:37:30', 'active'),
(36, 'wwww', 'DEMOwwww', 3, 'wwwwwDEMO', 1, 2222, 2, '2010-05-02 18:36:46', 'inactive');

INSERT INTO locations (loc_id, parent_loc_id, loc_code, loc_name, bldg_id, affln_id, status, loc_type_id, comment) VALUES
(1, 1, 'H-613', 'H-613 Classroom', 1, 1, 'available', 1, NULL),
(2, 2, 'H-627', 'H-627 Classroom', 1, 1, 'available', 1, NULL),
(3, NULL, 'H-011', 'H-011 Classromm', NULL, NULL, NULL, NULL, NULL),
(4, NULL, 'EV-011', 'EV-011 Classromm', NULL, NULL, NULL, NULL, NULL),
(5, NULL, 'H-833', 'On hand Lab', NULL, NULL, NULL, NULL, NULL),
(6, NULL, 'H-866', 'Printer Room', NULL, NULL, NULL, NULL, NULL),
(7, NULL, 'MB-011', 'MB.011 Classromm', NULL, NULL, NULL, NULL, NULL);

INSERT INTO permissions (permission_id, description) VALUES
(1, 'reserved for level 0'),
(2, 'reserved for level 0'),
(4, 'reserved for level 0'),
(8, 'reserved for level 1'),
(16, 'reserved for level 1'),
(32, 'reserved for level 1'),
(64, 'reserved for level 2'),
(128, 'reserved for level 2'),
(256, 'reserved for level 2'),
(512, 'reserved for level 3'),
(1024, 'reserved for level 3'),
(2048, 'reserved for level 3');

INSERT INTO professionaltitles (title_id, title_name, permission) VALUES
(1, 'Inventory staff - Common / administrative', 512),
(2, 'Inventory staff - Per department', 8),
(3, 'Inventory staff - Per faculty', 64),
(4, 'Full-time Faculty', 1),
(5, 'Part-time Faculty', 1),
(6, 'University Administration', 1024),
(7, 'IT Group', 2048),
(8, 'Research assistants', 1),
(9, 'Research associates', 1),
(10, 'Students - diploma', 1),
(11, 'Students - master''s thesis option', 1),
(12, 'Students - master''s course option', 1),
(13, 'Students - PhD', 1),
(14, 'Security', 1);

INSERT INTO requesttypes (req_type_id, req_type_code, description, permission) VALUES
(1, 'General Request', 'If you lost an item or found an item and want to check it with the administrator. Barcode or Serial Number of the item isn''t required.', NULL),
(2, 'Report a problem', 'If you found there''s problem with an item and want to report it to the administrator. You need to provide the Barcode or Serial Number of the item.', 0),
(3, 'Return back', 'An item was returned. The barcode or serial number is required.', 0),
(4, 'Moving', 'An item was moved from one location to another. Barcode or serial number is required.', 0),
(5, 'Request for', 'Ask for an item. Barcode or serial number isn''t required.', 0),
(6, 'Discard', 'An item was discard or wtite off. Barcode or serial number is required.', 0);

INSERT INTO userroles (user_role_id, user_id, title_id, affln_id, status) VALUES
(1, 1, 1, 0, NULL);
"#;

pub(crate) const SEED_ADMIN_CODE: &str = "admin";
pub(crate) const SEED_ADMIN_PASSWORD: &str = "teamtwo";
